"""Hot inner-loop kernels, numba-jitted with pure-numpy fallbacks.

Every kernel exists twice: a ``*_numpy`` vectorised implementation and a
``*_numba`` jitted one. The module-level names (``shift_abs_diff``,
``bilinear_resize``, ``affine_warp``, ``label_components``) are bound once at
import time according to the ``SCOPECAD_KERNELS`` environment variable:

    SCOPECAD_KERNELS=numba   force the jitted kernels (error if numba missing)
    SCOPECAD_KERNELS=numpy   force the numpy fallbacks
    SCOPECAD_KERNELS=auto    numba when importable, numpy otherwise (default)

``benchmarks/bench_kernels.py`` times both sides on identical inputs.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.ndimage

_FLAG = os.environ.get("SCOPECAD_KERNELS", "auto").lower()
if _FLAG not in ("auto", "numba", "numpy"):
    raise ValueError(f"SCOPECAD_KERNELS must be auto|numba|numpy, got {_FLAG!r}")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False
    if _FLAG == "numba":
        raise

USE_NUMBA = _FLAG == "numba" or (_FLAG == "auto" and HAVE_NUMBA)


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# overlap absolute-difference statistics for a candidate displacement
# ---------------------------------------------------------------------------

def shift_abs_diff_numpy(prev: np.ndarray, cur: np.ndarray, dx: int, dy: int):
    """Sum of |prev(x,y) - cur(x-dx, y-dy)| over the overlap, plus pixel count.

    Both images share dims; the current frame's top-left sits at (dx, dy) in
    the previous frame's coordinates.
    """
    h, w = prev.shape
    x0, x1 = max(0, dx), min(w, w + dx)
    y0, y1 = max(0, dy), min(h, h + dy)
    if x0 >= x1 or y0 >= y1:
        return 0.0, 0
    a = prev[y0:y1, x0:x1].astype(np.int32)
    b = cur[y0 - dy:y1 - dy, x0 - dx:x1 - dx].astype(np.int32)
    return float(np.abs(a - b).sum()), int(a.size)


def _shift_abs_diff_loop(prev, cur, dx, dy):
    h, w = prev.shape
    x0 = dx if dx > 0 else 0
    x1 = w + dx if dx < 0 else w
    y0 = dy if dy > 0 else 0
    y1 = h + dy if dy < 0 else h
    if x0 >= x1 or y0 >= y1:
        return 0.0, 0
    total = 0.0
    for y in range(y0, y1):
        for x in range(x0, x1):
            d = np.int64(prev[y, x]) - np.int64(cur[y - dy, x - dx])
            total += d if d >= 0 else -d
    return total, (x1 - x0) * (y1 - y0)


# ---------------------------------------------------------------------------
# bilinear resampling with pixel-center alignment and edge clamping
# ---------------------------------------------------------------------------

def bilinear_resize_numpy(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    v00 = src[np.ix_(y0, x0)]
    v01 = src[np.ix_(y0, x1)]
    v10 = src[np.ix_(y1, x0)]
    v11 = src[np.ix_(y1, x1)]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def _bilinear_resize_loop(src, out_h, out_w):
    h, w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        sy = (oy + 0.5) * (h / out_h) - 0.5
        if sy < 0.0:
            sy = 0.0
        elif sy > h - 1.0:
            sy = h - 1.0
        y0 = int(np.floor(sy))
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        fy = sy - y0
        for ox in range(out_w):
            sx = (ox + 0.5) * (w / out_w) - 0.5
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            x0 = int(np.floor(sx))
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            fx = sx - x0
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[oy, ox] = top * (1.0 - fy) + bot * fy
    return out


# ---------------------------------------------------------------------------
# inverse-mapped affine warp, zero fill outside the source sample domain
# ---------------------------------------------------------------------------

def affine_warp_numpy(src: np.ndarray, inv: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    sx = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    sy = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    inside = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
    sxc = np.clip(sx, 0.0, w - 1.0)
    syc = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sxc).astype(np.intp)
    y0 = np.floor(syc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sxc - x0
    fy = syc - y0
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    out[~inside] = 0.0
    return out


def _affine_warp_loop(src, inv, out_h, out_w):
    h, w = src.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            sx = inv[0, 0] * ox + inv[0, 1] * oy + inv[0, 2]
            sy = inv[1, 0] * ox + inv[1, 1] * oy + inv[1, 2]
            if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                continue
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            fx = sx - x0
            fy = sy - y0
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[oy, ox] = top * (1.0 - fy) + bot * fy
    return out


# ---------------------------------------------------------------------------
# connected-component labeling, ids dense 1..n in first-pixel row-major order
# ---------------------------------------------------------------------------

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def label_components_numpy(fg: np.ndarray, connectivity: int) -> np.ndarray:
    struct = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    raw, n = scipy.ndimage.label(fg, structure=struct)
    if n == 0:
        return raw.astype(np.int32)
    # scipy assigns ids in its own scan order; remap to first-occurrence order
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[nz], nz)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, n + 1, dtype=np.int32)
    return remap[raw]


def _label_components_loop(fg, connectivity):
    h, w = fg.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if fg[y, x] == 0:
                continue
            best = 0
            # previously scanned neighbors only
            if x > 0 and labels[y, x - 1] > 0:
                best = labels[y, x - 1]
            if y > 0:
                if labels[y - 1, x] > 0:
                    c = labels[y - 1, x]
                    best = c if best == 0 or c < best else best
                if connectivity == 8:
                    if x > 0 and labels[y - 1, x - 1] > 0:
                        c = labels[y - 1, x - 1]
                        best = c if best == 0 or c < best else best
                    if x + 1 < w and labels[y - 1, x + 1] > 0:
                        c = labels[y - 1, x + 1]
                        best = c if best == 0 or c < best else best
            if best == 0:
                parent[nxt] = nxt
                labels[y, x] = nxt
                nxt += 1
                continue
            labels[y, x] = best
            # union all distinct neighbor labels into best's set
            rb = best
            while parent[rb] != rb:
                rb = parent[rb]
            if x > 0 and labels[y, x - 1] > 0:
                r = labels[y, x - 1]
                while parent[r] != r:
                    r = parent[r]
                if r != rb:
                    parent[max(r, rb)] = min(r, rb)
                    rb = min(r, rb)
            if y > 0:
                for nx in range(x - 1, x + 2):
                    if nx < 0 or nx >= w:
                        continue
                    if connectivity == 4 and nx != x:
                        continue
                    if labels[y - 1, nx] > 0:
                        r = labels[y - 1, nx]
                        while parent[r] != r:
                            r = parent[r]
                        if r != rb:
                            parent[max(r, rb)] = min(r, rb)
                            rb = min(r, rb)
    # second pass: resolve roots, then densify in first-occurrence order
    dense = np.zeros(nxt, dtype=np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            r = lab
            while parent[r] != r:
                r = parent[r]
            if dense[r] == 0:
                count += 1
                dense[r] = count
            labels[y, x] = dense[r]
    return labels


if HAVE_NUMBA:
    shift_abs_diff_numba = njit(cache=True)(_shift_abs_diff_loop)
    bilinear_resize_numba = njit(cache=True)(_bilinear_resize_loop)
    affine_warp_numba = njit(cache=True)(_affine_warp_loop)
    label_components_numba = njit(cache=True)(_label_components_loop)
else:  # pragma: no cover
    shift_abs_diff_numba = None
    bilinear_resize_numba = None
    affine_warp_numba = None
    label_components_numba = None

if USE_NUMBA:
    shift_abs_diff = shift_abs_diff_numba
    bilinear_resize = bilinear_resize_numba
    affine_warp = affine_warp_numba
    label_components = label_components_numba
else:
    shift_abs_diff = shift_abs_diff_numpy
    bilinear_resize = bilinear_resize_numpy
    affine_warp = affine_warp_numpy
    label_components = label_components_numpy
