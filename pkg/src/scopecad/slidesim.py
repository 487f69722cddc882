"""Virtual microscope camera: viewport frames cropped from a whole-slide
image along a pan path, with optional shutter-exposure skew.

The synthetic slide generator ships here so the whole test and acceptance
suite can run without any external data: a layered-noise tissue texture in
the 35..185 luminance band plus hard-edged elliptical hydrops blobs in the
207..250 band, with a matching ground-truth mask. A luminance threshold of
200 separates the two exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .errors import DimensionMismatch, ViewportLargerThanSlide
from .raster import Rect, dims, quantize_u8


@dataclass
class VirtualSlide:
    image: np.ndarray
    gt_mask: np.ndarray | None = None
    id: str = "slide"

    def __post_init__(self):
        if self.gt_mask is not None and self.gt_mask.shape[:2] != self.image.shape[:2]:
            raise DimensionMismatch(
                f"mask {self.gt_mask.shape[:2]} does not match slide {self.image.shape[:2]}")


@dataclass
class FrameEvent:
    index: int
    timestamp_ms: int
    pixels: np.ndarray
    true_placement: Rect  # slide coordinates, evaluation only


def viewport_frame(
    slide: VirtualSlide, center: tuple[float, float], vw: int, vh: int
) -> tuple[np.ndarray, Rect]:
    """Crop a viewport around a center, clamping the rect inside the slide."""
    sw, sh = dims(slide.image)
    if vw > sw or vh > sh or vw < 1 or vh < 1:
        raise ViewportLargerThanSlide(f"viewport {vw}x{vh} does not fit slide {sw}x{sh}")
    x0 = int(round(center[0] - vw / 2.0))
    y0 = int(round(center[1] - vh / 2.0))
    x0 = min(max(x0, 0), sw - vw)
    y0 = min(max(y0, 0), sh - vh)
    rect = Rect(x0, y0, vw, vh)
    return slide.image[y0:y0 + vh, x0:x0 + vw].copy(), rect


def rolling_shutter_distort(frame: np.ndarray, velocity: tuple[float, float]) -> np.ndarray:
    """First-order shutter-exposure skew.

    Row r (of H) samples the frame at a horizontal offset of round(vx*r/H)
    and a vertical offset of round(vy*r/H), edge-clamped; later rows expose
    later and therefore see the scene displaced further along the motion.
    """
    vx, vy = velocity
    if vx == 0 and vy == 0:
        return frame.copy()
    h, w = frame.shape[:2]
    r = np.arange(h)
    shift_x = np.rint(vx * r / h).astype(np.intp)
    shift_y = np.rint(vy * r / h).astype(np.intp)
    rows = np.clip(r + shift_y, 0, h - 1)
    cols = np.clip(np.arange(w)[None, :] + shift_x[:, None], 0, w - 1)
    return frame[rows[:, None], cols]


def generate_path_frames(
    slide: VirtualSlide,
    path: list[tuple[float, float]],
    vw: int = 640,
    vh: int = 480,
    fps: float = 2.0,
    distortion: bool = False,
):
    """Yield one FrameEvent per path center at the camera frame rate.

    Distortion velocity is the delta of consecutive clamped viewport origins
    in pixels per frame; the first frame is always undistorted.
    """
    if not path:
        raise ValueError("path must contain at least one center")
    interval = 1000.0 / fps
    prev_origin = None
    for index, center in enumerate(path):
        pixels, rect = viewport_frame(slide, center, vw, vh)
        if distortion and prev_origin is not None:
            velocity = (rect.x - prev_origin[0], rect.y - prev_origin[1])
            pixels = rolling_shutter_distort(pixels, velocity)
        prev_origin = (rect.x, rect.y)
        yield FrameEvent(index, int(round(index * interval)), pixels, rect)


def _smooth_noise(rng: np.random.Generator, h: int, w: int, sigma: float) -> np.ndarray:
    field = scipy.ndimage.gaussian_filter(rng.random((h, w)), sigma)
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.zeros((h, w))
    return (field - lo) / (hi - lo)


def synthetic_slide(
    seed: int,
    width: int = 2000,
    height: int = 1500,
    blobs: int = 40,
    blob_axes: tuple[int, int] = (16, 44),
    slide_id: str | None = None,
    blob_centers: list[tuple[float, float]] | None = None,
) -> VirtualSlide:
    """Seeded tissue-like RGB slide with elliptical hydrops blobs and gt mask.

    ``blob_centers`` overrides the uniform random placement, e.g. to control
    how many lesions straddle a tile grid.
    """
    rng = np.random.default_rng(seed)
    coarse = _smooth_noise(rng, height, width, 24.0)
    mid = _smooth_noise(rng, height, width, 6.0)
    grain = rng.random((height, width))
    lum = 58.0 + 92.0 * coarse + 34.0 * (mid - 0.5) + 14.0 * (grain - 0.5)
    lum = np.clip(lum, 35.0, 185.0)

    gt = np.zeros((height, width), dtype=np.uint8)
    lo, hi = blob_axes
    margin = hi + 4
    if blob_centers is None:
        centers = [(rng.uniform(margin, width - margin),
                    rng.uniform(margin, height - margin)) for _ in range(blobs)]
    else:
        centers = [(min(max(cx, margin), width - margin),
                    min(max(cy, margin), height - margin))
                   for cx, cy in blob_centers]
    for cx, cy in centers:
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        theta = rng.uniform(0, np.pi)
        span = int(np.ceil(max(a, b))) + 2
        x0, x1 = int(cx) - span, int(cx) + span + 1
        y0, y1 = int(cy) - span, int(cy) + span + 1
        ys, xs = np.mgrid[y0:y1, x0:x1]
        dx = xs - cx
        dy = ys - cy
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        gt[y0:y1, x0:x1][inside] = 1

    blob_tex = 212.0 + 22.0 * _smooth_noise(rng, height, width, 2.0)
    lum = np.where(gt > 0, np.clip(blob_tex, 210.0, 235.0), lum)

    rgb = np.stack([lum * 1.08, lum * 0.97, lum * 0.93], axis=-1)
    image = quantize_u8(rgb)
    return VirtualSlide(image, gt, slide_id or f"synthetic-{seed}")


def serpentine_path(
    slide_w: int, slide_h: int, vw: int, vh: int, step: float, count: int,
) -> list[tuple[float, float]]:
    """Boustrophedon scan of viewport centers covering the slide."""
    x_lo, x_hi = vw / 2.0, slide_w - vw / 2.0
    y_lo, y_hi = vh / 2.0, slide_h - vh / 2.0
    path = []
    x, y = x_lo, y_lo
    direction = 1.0
    while len(path) < count:
        path.append((x, y))
        nx = x + direction * step
        if nx > x_hi or nx < x_lo:
            direction = -direction
            y = y + step if y + step <= y_hi else y_lo
        else:
            x = nx
    return path


def load_path(path_file) -> list[tuple[float, float]]:
    """Read a pan path from a JSON list of [x, y] centers."""
    with open(path_file) as fh:
        data = json.load(fh)
    return [(float(p[0]), float(p[1])) for p in data]
