"""Frame-to-frame registration.

Three interchangeable estimators:

* phase correlation (the production path): locate the inverse-FFT peak of the
  normalized cross-power spectrum, then disambiguate the circular wrap into
  one of four signed displacements by minimum mean absolute gray difference
  over the candidate overlap;
* direct affine minimisation: Gauss-Newton on a squared-difference surrogate
  over a coarse-to-fine pyramid, reporting the absolute-difference objective;
* feature matching (see :mod:`scopecad.features`).

Displacement convention: the current frame's top-left corner sits at
``(dx, dy)`` in the previous frame's coordinate system, i.e.
``prev(x, y) ~= cur(x - dx, y - dy)`` over the overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import Degenerate, DidNotConverge, DimensionMismatch, NoOverlap, TooSmall
from .raster import channel_count, dims, quantize_u8, require_same_dims, to_luminance

STATUS_OK = "ok"
STATUS_DEGRADED = "degraded"

# normalization floor for zero-energy spectrum bins
_SPECTRUM_EPS = 1e-9


@dataclass(frozen=True)
class Displacement:
    dx: int
    dy: int


@dataclass
class CorrelationSurface:
    values: np.ndarray
    peak_pos: tuple[int, int]  # (px, py), wrapped into [0,W) x [0,H)
    peak_value: float


@dataclass
class RegistrationResult:
    displacement: Displacement
    peak_value: float
    overlap_mad: float
    overlap_area: int
    status: str


@dataclass
class RegistrationConfig:
    min_overlap_fraction: float = 0.05
    peak_threshold: float = 0.04
    mad_threshold: float = 20.0


@dataclass
class AffineConfig:
    max_iterations: int = 50
    update_tolerance: float = 1e-4
    stall_limit: int = 5
    pyramid_min_dim: int = 64
    det_bounds: tuple[float, float] = (0.1, 10.0)


@dataclass
class AffineResult:
    """2x3 transform placing the current frame in previous-frame coordinates."""

    matrix: np.ndarray
    objective: float  # sum of absolute gray differences over the valid overlap
    iterations: int = 0

    @property
    def linear_det(self) -> float:
        return float(np.linalg.det(self.matrix[:, :2]))


def _require_gray(image: np.ndarray, name: str):
    if channel_count(image) != 1:
        raise DimensionMismatch(f"{name} must be 1-channel, got shape {image.shape}")


def cross_power_surface(prev: np.ndarray, cur: np.ndarray) -> CorrelationSurface:
    """Inverse FFT of the normalized cross-power spectrum of two frames.

    Means are subtracted first so the DC term cannot bias the peak. The peak
    of the returned surface sits at the wrapped displacement of the current
    frame relative to the previous one.
    """
    _require_gray(prev, "prev")
    _require_gray(cur, "cur")
    require_same_dims(prev, cur, "frames")
    h, w = prev.shape
    if w < 16 or h < 16:
        raise TooSmall(f"frames must be at least 16x16, got {w}x{h}")

    a = prev.astype(np.float64)
    b = cur.astype(np.float64)
    # real-input transforms: the cross-power spectrum of real images is
    # conjugate symmetric, so the half spectrum carries everything
    f_prev = np.fft.rfft2(a - a.mean())
    f_cur = np.fft.rfft2(b - b.mean())
    cross = f_prev * np.conj(f_cur)
    spectrum = cross / np.maximum(np.abs(cross), _SPECTRUM_EPS)
    surface = np.fft.irfft2(spectrum, s=(h, w))

    flat_peak = int(np.argmax(surface))  # first maximum in row-major order
    py, px = divmod(flat_peak, w)
    return CorrelationSurface(surface, (px, py), float(surface[py, px]))


def overlap_mad(prev: np.ndarray, cur: np.ndarray, d: Displacement) -> tuple[float, int]:
    """Mean absolute gray difference and pixel count over the overlap of two
    equal-sized frames related by displacement ``d``."""
    require_same_dims(prev, cur, "frames")
    gray_prev = to_luminance(prev)
    gray_cur = to_luminance(cur)
    total, area = _kernels.shift_abs_diff(gray_prev, gray_cur, int(d.dx), int(d.dy))
    if area == 0:
        raise NoOverlap(f"displacement {d} leaves no overlap")
    return total / area, area


def _candidate_displacements(px: int, py: int, w: int, h: int):
    # row-major over (dy, dx) pairs; ties in MAD keep the first survivor
    for dy in (py, py - h):
        for dx in (px, px - w):
            yield dx, dy


def resolve_translation(
    prev: np.ndarray,
    cur: np.ndarray,
    surface: CorrelationSurface,
    cfg: RegistrationConfig | None = None,
) -> RegistrationResult:
    """Disambiguate the wrapped correlation peak into a signed displacement.

    The four wrap candidates are scored by mean absolute gray difference over
    their overlap; candidates whose overlap is below the configured fraction
    of the frame area are discarded.
    """
    cfg = cfg or RegistrationConfig()
    require_same_dims(prev, cur, "frames")
    h, w = prev.shape[:2]
    if surface.values.shape != (h, w):
        raise DimensionMismatch(
            f"surface dims {surface.values.shape} do not match frames {(h, w)}")

    gray_prev = to_luminance(prev)
    gray_cur = to_luminance(cur)
    px, py = surface.peak_pos
    floor = cfg.min_overlap_fraction * w * h

    best = None
    for dx, dy in _candidate_displacements(px, py, w, h):
        area = max(0, w - abs(dx)) * max(0, h - abs(dy))
        if area == 0 or area < floor:
            continue
        total, area = _kernels.shift_abs_diff(gray_prev, gray_cur, dx, dy)
        mad = total / area
        if best is None or mad < best[0]:
            best = (mad, area, dx, dy)

    if best is None:
        raise NoOverlap(
            f"all wrap candidates of peak {surface.peak_pos} fall below "
            f"min_overlap_fraction={cfg.min_overlap_fraction}")

    mad, area, dx, dy = best
    status = STATUS_OK
    if surface.peak_value < cfg.peak_threshold or mad > cfg.mad_threshold:
        status = STATUS_DEGRADED
    return RegistrationResult(Displacement(dx, dy), surface.peak_value, mad, area, status)


def register_translation(
    prev: np.ndarray, cur: np.ndarray, cfg: RegistrationConfig | None = None
) -> RegistrationResult:
    """Full phase-correlation path: spectrum, peak, four-case disambiguation."""
    gray_prev = to_luminance(prev)
    gray_cur = to_luminance(cur)
    surface = cross_power_surface(gray_prev, gray_cur)
    return resolve_translation(gray_prev, gray_cur, surface, cfg)


# ---------------------------------------------------------------------------
# direct affine registration
# ---------------------------------------------------------------------------

def _sample_bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Values and validity of bilinear samples at float coordinates."""
    h, w = img.shape
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    xc = np.clip(xs, 0.0, w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy, inside


def _halve(img: np.ndarray) -> np.ndarray:
    return _kernels.bilinear_resize(img, img.shape[0] // 2, img.shape[1] // 2)


def _invert_affine(m: np.ndarray) -> np.ndarray:
    a = m[:, :2]
    det = np.linalg.det(a)
    if abs(det) < 1e-12:
        raise Degenerate("affine linear part is singular")
    a_inv = np.linalg.inv(a)
    out = np.empty((2, 3))
    out[:, :2] = a_inv
    out[:, 2] = -a_inv @ m[:, 2]
    return out


def affine_register(
    prev: np.ndarray, cur: np.ndarray, cfg: AffineConfig | None = None
) -> AffineResult:
    """Estimate the affine transform placing ``cur`` in ``prev`` coordinates.

    Gauss-Newton on the sum of squared differences, coarse to fine; the
    returned objective is the sum of absolute differences of the final warp.
    Raises DidNotConverge when the surrogate objective stops improving for
    ``stall_limit`` consecutive iterations, and Degenerate when the linear
    part's determinant leaves the accepted range.
    """
    cfg = cfg or AffineConfig()
    require_same_dims(prev, cur, "frames")
    gray_prev = to_luminance(prev).astype(np.float64)
    gray_cur = to_luminance(cur).astype(np.float64)

    levels = [(gray_prev, gray_cur)]
    while min(levels[-1][0].shape) // 2 >= cfg.pyramid_min_dim:
        p, c = levels[-1]
        levels.append((_halve(p), _halve(c)))

    # q parametrises the inverse map: prev coords -> cur sample coords
    q = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    total_iterations = 0

    for level in range(len(levels) - 1, -1, -1):
        p_img, c_img = levels[level]
        lh, lw = p_img.shape
        gy, gx = np.gradient(c_img)
        # residuals on a decimated grid once the level is large; the final
        # objective below is still computed dense
        step = 2 if min(lh, lw) >= 320 else 1
        ys, xs = np.mgrid[0:lh:step, 0:lw:step]
        xs = xs.ravel().astype(np.float64)
        ys = ys.ravel().astype(np.float64)
        target = p_img[::step, ::step].ravel()

        best_obj = np.inf
        stall = 0
        for _ in range(cfg.max_iterations):
            total_iterations += 1
            sx = q[0] * xs + q[1] * ys + q[2]
            sy = q[3] * xs + q[4] * ys + q[5]
            warped, ok = _sample_bilinear(c_img, sx, sy)
            if ok.sum() < 64:
                raise DidNotConverge("overlap collapsed during optimisation")
            r = (warped - target)[ok]
            obj = float(r @ r)
            if obj < best_obj - 1e-9:
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall >= cfg.stall_limit:
                    if level == 0:
                        raise DidNotConverge(
                            f"objective failed to decrease for {cfg.stall_limit} iterations")
                    break  # coarse levels only initialise the next one
            ix, _ = _sample_bilinear(gx, sx, sy)
            iy, _ = _sample_bilinear(gy, sx, sy)
            jx = xs[ok]
            jy = ys[ok]
            ixo = ix[ok]
            iyo = iy[ok]
            jac = np.stack([ixo * jx, ixo * jy, ixo, iyo * jx, iyo * jy, iyo], axis=1)
            a = jac.T @ jac
            b = jac.T @ r
            try:
                delta = np.linalg.solve(a, b)
            except np.linalg.LinAlgError:
                raise DidNotConverge("normal equations are singular") from None
            q -= delta
            if np.linalg.norm(delta) < cfg.update_tolerance:
                break
        if level > 0:
            q[2] *= 2.0
            q[5] *= 2.0

    g = np.array([[q[0], q[1], q[2]], [q[3], q[4], q[5]]])
    matrix = _invert_affine(g)
    det = abs(np.linalg.det(matrix[:, :2]))
    lo, hi = cfg.det_bounds
    if not (lo <= det <= hi):
        raise Degenerate(f"determinant {det:.4g} outside [{lo}, {hi}]")

    # absolute-difference objective of the final alignment
    h, w = gray_prev.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = q[0] * xs.ravel() + q[1] * ys.ravel() + q[2]
    sy = q[3] * xs.ravel() + q[4] * ys.ravel() + q[5]
    warped, ok = _sample_bilinear(gray_cur, sx, sy)
    objective = float(np.abs(warped[ok] - gray_prev.ravel()[ok]).sum())
    return AffineResult(matrix, objective, total_iterations)


def warp_affine(image: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Inverse-mapped bilinear warp; destinations mapping outside are 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (2, 3):
        raise DimensionMismatch(f"affine matrix must be 2x3, got {matrix.shape}")
    inv = _invert_affine(matrix)
    h, w = image.shape[:2]
    if channel_count(image) == 1:
        return quantize_u8(_kernels.affine_warp(image.astype(np.float64), inv, h, w))
    planes = [
        _kernels.affine_warp(image[:, :, c].astype(np.float64), inv, h, w)
        for c in range(3)
    ]
    return quantize_u8(np.stack(planes, axis=-1))


def displacement_from_matrix(matrix: np.ndarray, frame_w: int, frame_h: int) -> Displacement:
    """Integer displacement implied by a transform: motion of the frame center."""
    matrix = np.asarray(matrix, dtype=np.float64)
    cx, cy = (frame_w - 1) / 2.0, (frame_h - 1) / 2.0
    if matrix.shape == (2, 3):
        mx = matrix[0, 0] * cx + matrix[0, 1] * cy + matrix[0, 2]
        my = matrix[1, 0] * cx + matrix[1, 1] * cy + matrix[1, 2]
    elif matrix.shape == (3, 3):
        v = matrix @ np.array([cx, cy, 1.0])
        if abs(v[2]) < 1e-12:
            raise Degenerate("homography maps frame center to infinity")
        mx, my = v[0] / v[2], v[1] / v[2]
    else:
        raise DimensionMismatch(f"expected 2x3 or 3x3 matrix, got {matrix.shape}")
    return Displacement(int(round(mx - cx)), int(round(my - cy)))
