"""Box-filter Hessian keypoints with upright 64-d Haar descriptors.

Detection follows the fast-Hessian recipe: an integral image feeds box-filter
approximations of the second derivatives at filter sizes 9/15/21/27, the
response at each pixel is

    det = (Dxx / L^2) * (Dyy / L^2) - (0.9 * Dxy / L^2) ** 2

and candidates must strictly exceed their 26 scale-space neighbors plus the
response threshold. Descriptors are the classic 4x4 grid of (sum dx, sum dy,
sum |dx|, sum |dy|) Haar statistics over a 20s window, Gaussian weighted and
normalized to unit length. Orientation assignment is not implemented; the
detector runs upright.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Degenerate, InsufficientMatches, NoConsensus, TooSmall
from .raster import channel_count

FILTER_SIZES = (9, 15, 21, 27)


@dataclass
class FeatureConfig:
    response_threshold: float = 20.0
    filter_sizes: tuple[int, ...] = FILTER_SIZES
    upright: bool = True
    max_keypoints: int = 500
    ratio: float = 0.8
    ransac_iterations: int = 1000
    inlier_threshold: float = 3.0
    min_inliers: int = 8
    seed: int = 0


@dataclass
class Keypoint:
    x: float
    y: float
    scale: float
    response: float
    laplacian_sign: int
    descriptor: np.ndarray = field(repr=False)


def integral_image(image: np.ndarray) -> np.ndarray:
    """Exclusive-prefix integral image, shape (h+1, w+1), exact int64 sums."""
    h, w = image.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = image.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    return ii


def _boxes(ii, rows, r0, r1, cols, c0, c1):
    """Box sums [center_r + r0, center_r + r1) x [center_c + c0, center_c + c1)
    for the center grid (rows x cols starting at margin m)."""
    m_r, n_r = rows
    m_c, n_c = cols
    return (ii[m_r + r1:m_r + r1 + n_r, m_c + c1:m_c + c1 + n_c]
            - ii[m_r + r0:m_r + r0 + n_r, m_c + c1:m_c + c1 + n_c]
            - ii[m_r + r1:m_r + r1 + n_r, m_c + c0:m_c + c0 + n_c]
            + ii[m_r + r0:m_r + r0 + n_r, m_c + c0:m_c + c0 + n_c])


def hessian_response(ii: np.ndarray, size: int):
    """Response and trace-sign maps for one filter size, zero at the margins."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    lobe = size // 3
    m = (size - 1) // 2
    n_r, n_c = h - 2 * m, w - 2 * m
    if n_r <= 0 or n_c <= 0:
        z = np.zeros((h, w))
        return z, np.zeros((h, w), dtype=np.int8)
    half = (lobe - 1) // 2

    rows, cols = (m, n_r), (m, n_c)
    dyy_whole = _boxes(ii, rows, -m, m + 1, cols, -(lobe - 1), lobe)
    dyy_mid = _boxes(ii, rows, -half, half + 1, cols, -(lobe - 1), lobe)
    dyy = dyy_whole - 3 * dyy_mid
    dxx_whole = _boxes(ii, rows, -(lobe - 1), lobe, cols, -m, m + 1)
    dxx_mid = _boxes(ii, rows, -(lobe - 1), lobe, cols, -half, half + 1)
    dxx = dxx_whole - 3 * dxx_mid
    dxy = (_boxes(ii, rows, -lobe, 0, cols, 1, lobe + 1)
           + _boxes(ii, rows, 1, lobe + 1, cols, -lobe, 0)
           - _boxes(ii, rows, -lobe, 0, cols, -lobe, 0)
           - _boxes(ii, rows, 1, lobe + 1, cols, 1, lobe + 1))

    inv = 1.0 / (size * size)
    nxx = dxx * inv
    nyy = dyy * inv
    nxy = dxy * inv
    det = nxx * nyy - (0.9 * nxy) ** 2

    response = np.zeros((h, w))
    response[m:m + n_r, m:m + n_c] = det
    sign = np.zeros((h, w), dtype=np.int8)
    sign[m:m + n_r, m:m + n_c] = np.where(nxx + nyy >= 0, 1, -1)
    return response, sign


def _scale_space_maxima(stack: np.ndarray, sizes, threshold: float):
    """Strict maxima over the 26-neighborhood, interior scales only."""
    n, h, w = stack.shape
    found = []
    for s in range(1, n - 1):
        margin = (sizes[s + 1] - 1) // 2 + 1
        if h - margin <= margin or w - margin <= margin:
            continue
        center = stack[s, margin:h - margin, margin:w - margin]
        ok = center > threshold
        for ds in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if ds == 0 and dy == 0 and dx == 0:
                        continue
                    neigh = stack[s + ds,
                                  margin + dy:h - margin + dy,
                                  margin + dx:w - margin + dx]
                    ok &= center > neigh
            if not ok.any():
                break
        ys, xs = np.nonzero(ok)
        for y, x in zip(ys + margin, xs + margin):
            found.append((s, int(y), int(x)))
    return found


def _refine_quadratic(resp: np.ndarray, y: int, x: int):
    gx = (resp[y, x + 1] - resp[y, x - 1]) / 2.0
    gy = (resp[y + 1, x] - resp[y - 1, x]) / 2.0
    gxx = resp[y, x + 1] - 2.0 * resp[y, x] + resp[y, x - 1]
    gyy = resp[y + 1, x] - 2.0 * resp[y, x] + resp[y - 1, x]
    gxy = (resp[y + 1, x + 1] - resp[y + 1, x - 1]
           - resp[y - 1, x + 1] + resp[y - 1, x - 1]) / 4.0
    det = gxx * gyy - gxy * gxy
    if abs(det) < 1e-12:
        return 0.0, 0.0
    ox = -(gyy * gx - gxy * gy) / det
    oy = -(gxx * gy - gxy * gx) / det
    return float(np.clip(ox, -0.5, 0.5)), float(np.clip(oy, -0.5, 0.5))


def _box_sum(ii, y0, y1, x0, x1):
    return ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]


def _describe(ii: np.ndarray, x: float, y: float, scale: float):
    """Upright 64-d descriptor from a 20-scale window of Haar responses."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    hr = max(1, int(round(scale)))
    offs = np.arange(20) - 10 + 0.5
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    px = np.rint(x + ox * scale).astype(np.int64)
    py = np.rint(y + oy * scale).astype(np.int64)
    valid = (px - hr >= 0) & (px + hr <= w) & (py - hr >= 0) & (py + hr <= h)
    pxc = np.clip(px, hr, w - hr)
    pyc = np.clip(py, hr, h - hr)
    dx = (_box_sum(ii, pyc - hr, pyc + hr, pxc, pxc + hr)
          - _box_sum(ii, pyc - hr, pyc + hr, pxc - hr, pxc)).astype(np.float64)
    dy = (_box_sum(ii, pyc, pyc + hr, pxc - hr, pxc + hr)
          - _box_sum(ii, pyc - hr, pyc, pxc - hr, pxc + hr)).astype(np.float64)
    dx[~valid] = 0.0
    dy[~valid] = 0.0
    g = np.exp(-(ox ** 2 + oy ** 2) / (2.0 * 3.3 ** 2))
    dx *= g
    dy *= g

    desc = np.zeros((4, 4, 4))
    for sy in range(4):
        for sx in range(4):
            bx = dx[sy * 5:sy * 5 + 5, sx * 5:sx * 5 + 5]
            by = dy[sy * 5:sy * 5 + 5, sx * 5:sx * 5 + 5]
            desc[sy, sx] = (bx.sum(), by.sum(), np.abs(bx).sum(), np.abs(by).sum())
    flat = desc.ravel()
    norm = np.linalg.norm(flat)
    if norm < 1e-12:
        return None
    return flat / norm


def detect_and_describe(image: np.ndarray, cfg: FeatureConfig | None = None) -> list[Keypoint]:
    cfg = cfg or FeatureConfig()
    if not cfg.upright:
        raise NotImplementedError("orientation assignment is not implemented")
    if channel_count(image) != 1:
        raise TooSmall("detector expects a 1-channel image")
    h, w = image.shape
    if h < 32 or w < 32:
        raise TooSmall(f"image must be at least 32x32, got {w}x{h}")

    ii = integral_image(image)
    responses = []
    signs = []
    for size in cfg.filter_sizes:
        resp, sign = hessian_response(ii, size)
        responses.append(resp)
        signs.append(sign)
    stack = np.stack(responses)
    candidates = _scale_space_maxima(stack, cfg.filter_sizes, cfg.response_threshold)
    # strongest first; ties resolved in row-major order
    candidates.sort(key=lambda c: (-stack[c[0], c[1], c[2]], c[1], c[2]))
    candidates = candidates[:cfg.max_keypoints]

    kps = []
    for s, y, x in candidates:
        ox, oy = _refine_quadratic(responses[s], y, x)
        scale = 1.2 * cfg.filter_sizes[s] / 9.0
        desc = _describe(ii, x + ox, y + oy, scale)
        if desc is None:
            continue
        kps.append(Keypoint(
            x=x + ox, y=y + oy, scale=scale,
            response=float(stack[s, y, x]),
            laplacian_sign=int(signs[s][y, x]),
            descriptor=desc,
        ))
    return kps


# ---------------------------------------------------------------------------
# matching and model estimation
# ---------------------------------------------------------------------------

def _normalize_points(pts: np.ndarray):
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    scale = np.sqrt(2.0) / d if d > 1e-12 else 1.0
    t = np.array([[scale, 0.0, -scale * centroid[0]],
                  [0.0, scale, -scale * centroid[1]],
                  [0.0, 0.0, 1.0]])
    ones = np.ones((len(pts), 1))
    return (np.hstack([pts, ones]) @ t.T)[:, :2], t


def _dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Direct linear transform, normalized; maps src points onto dst points."""
    src_n, t_src = _normalize_points(src)
    dst_n, t_dst = _normalize_points(dst)
    rows = []
    for (x, y), (u, v) in zip(src_n, dst_n):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    hn = vt[-1].reshape(3, 3)
    hom = np.linalg.inv(t_dst) @ hn @ t_src
    if abs(hom[2, 2]) < 1e-12:
        raise Degenerate("homography normalisation failed")
    return hom / hom[2, 2]


def _project(hom: np.ndarray, pts: np.ndarray) -> np.ndarray:
    p = np.hstack([pts, np.ones((len(pts), 1))]) @ hom.T
    zz = p[:, 2:3]
    zz = np.where(np.abs(zz) < 1e-12, 1e-12, zz)
    return p[:, :2] / zz


def match_descriptors(kps_a: list[Keypoint], kps_b: list[Keypoint], ratio: float):
    """Indices (i, j) of ratio-test matches from a into b, same-sign pairs only."""
    da = np.stack([k.descriptor for k in kps_a])
    db = np.stack([k.descriptor for k in kps_b])
    sa = np.array([k.laplacian_sign for k in kps_a])
    sb = np.array([k.laplacian_sign for k in kps_b])
    d2 = np.maximum(
        (da ** 2).sum(1)[:, None] + (db ** 2).sum(1)[None, :] - 2.0 * (da @ db.T), 0.0)
    d2[sa[:, None] != sb[None, :]] = np.inf
    matches = []
    for i in range(len(kps_a)):
        row = d2[i]
        if not np.isfinite(row).any():
            continue
        j = int(np.argmin(row))
        d1 = np.sqrt(row[j])
        rest = np.delete(row, j)
        finite = rest[np.isfinite(rest)]
        if finite.size:
            d2nd = np.sqrt(finite.min())
            if d2nd > 1e-12 and d1 / d2nd >= ratio:
                continue
        matches.append((i, j))
    return matches


def match_and_estimate(
    kps_prev: list[Keypoint], kps_cur: list[Keypoint], cfg: FeatureConfig | None = None
) -> tuple[np.ndarray, int]:
    """Ratio-test matching plus RANSAC homography mapping cur onto prev."""
    cfg = cfg or FeatureConfig()
    if not kps_prev or not kps_cur:
        raise InsufficientMatches("keypoint list is empty")
    pairs = match_descriptors(kps_cur, kps_prev, cfg.ratio)
    if len(pairs) < 4:
        raise InsufficientMatches(f"only {len(pairs)} matches survive the ratio test")

    src = np.array([[kps_cur[i].x, kps_cur[i].y] for i, _ in pairs])
    dst = np.array([[kps_prev[j].x, kps_prev[j].y] for _, j in pairs])
    rng = np.random.default_rng(cfg.seed)
    n = len(pairs)
    best_inliers = None
    for _ in range(cfg.ransac_iterations):
        pick = rng.choice(n, size=4, replace=False)
        try:
            hom = _dlt_homography(src[pick], dst[pick])
        except (Degenerate, np.linalg.LinAlgError):
            continue
        err = np.linalg.norm(_project(hom, src) - dst, axis=1)
        inliers = err < cfg.inlier_threshold
        if best_inliers is None or inliers.sum() > best_inliers.sum():
            best_inliers = inliers
    if best_inliers is None or best_inliers.sum() < max(4, cfg.min_inliers):
        count = 0 if best_inliers is None else int(best_inliers.sum())
        raise NoConsensus(f"best consensus has {count} inliers, need {cfg.min_inliers}")

    hom = _dlt_homography(src[best_inliers], dst[best_inliers])
    return hom, int(best_inliers.sum())
