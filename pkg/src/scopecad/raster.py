"""Raster primitives: 8-bit images, rectangles, resampling, PNG boundaries.

A raster is a plain ``numpy.ndarray`` with dtype uint8: shape ``(h, w)`` for
luminance images and ``(h, w, 3)`` for RGB. Rasters are treated as immutable
values; operations return new arrays and never modify their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import _kernels
from .errors import DimensionMismatch, OutOfBounds, UnsupportedChannels

# ITU-R BT.601 luminance weights
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# palette used when writing label masks so they are viewable directly
_MASK_PALETTE = [0, 0, 0, 0, 255, 0, 255, 64, 64, 64, 96, 255]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in integer canvas coordinates (may be negative)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative rect dims: {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def intersect(self, other: "Rect") -> "Rect":
        x = max(self.x, other.x)
        y = max(self.y, other.y)
        x2 = min(self.x2, other.x2)
        y2 = min(self.y2, other.y2)
        if x2 <= x or y2 <= y:
            return Rect(x, y, 0, 0)
        return Rect(x, y, x2 - x, y2 - y)

    def inflate(self, margin: int) -> "Rect":
        return Rect(self.x - margin, self.y - margin,
                    self.w + 2 * margin, self.h + 2 * margin)

    def shift(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    def contains(self, other: "Rect") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and self.x2 >= other.x2 and self.y2 >= other.y2)


def channel_count(image: np.ndarray) -> int:
    if image.ndim == 2:
        return 1
    if image.ndim == 3 and image.shape[2] == 3:
        return 3
    raise UnsupportedChannels(f"expected (h, w) or (h, w, 3), got shape {image.shape}")


def dims(image: np.ndarray) -> tuple[int, int]:
    """(width, height) of a raster."""
    return image.shape[1], image.shape[0]


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round (half to even) and clamp float samples into uint8."""
    return np.clip(np.round(values), 0, 255).astype(np.uint8)


def to_luminance(image: np.ndarray) -> np.ndarray:
    """BT.601 luminance; 1-channel inputs are returned unchanged."""
    if channel_count(image) == 1:
        return image
    y = image.astype(np.float64) @ _LUMA_WEIGHTS
    return quantize_u8(y)


def resample(image: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment and edge clamping."""
    if target_width < 1 or target_height < 1:
        raise ValueError(f"target dims must be >= 1, got {target_width}x{target_height}")
    w, h = dims(image)
    if (w, h) == (target_width, target_height):
        return image
    if channel_count(image) == 1:
        out = _kernels.bilinear_resize(image.astype(np.float64), target_height, target_width)
        return quantize_u8(out)
    planes = [
        _kernels.bilinear_resize(image[:, :, c].astype(np.float64), target_height, target_width)
        for c in range(3)
    ]
    return quantize_u8(np.stack(planes, axis=-1))


def crop_region(image: np.ndarray, region: Rect) -> np.ndarray:
    w, h = dims(image)
    if region.x < 0 or region.y < 0 or region.x2 > w or region.y2 > h:
        raise OutOfBounds(f"region {region} exceeds image {w}x{h}")
    return image[region.y:region.y2, region.x:region.x2].copy()


def promote_rgb(image: np.ndarray) -> np.ndarray:
    if channel_count(image) == 3:
        return image.copy()
    return np.repeat(image[:, :, None], 3, axis=2)


def require_same_dims(a: np.ndarray, b: np.ndarray, what: str = "images"):
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what} differ: {a.shape[:2]} vs {b.shape[:2]}")


def load_png(path) -> np.ndarray:
    """Read a PNG as a 1- or 3-channel raster."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(path, image: np.ndarray):
    channel_count(image)
    Image.fromarray(image).save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    """Read a label-mask PNG, keeping raw palette indices or gray labels."""
    with Image.open(path) as im:
        if im.mode not in ("P", "L"):
            raise UnsupportedChannels(f"mask PNG must be palette or gray, got mode {im.mode}")
        mask = np.asarray(im, dtype=np.uint8)
    if mask.max(initial=0) > 3:
        # tolerate 0/255 binary masks
        mask = (mask > 0).astype(np.uint8)
    return mask


def save_mask_png(path, mask: np.ndarray):
    if mask.ndim != 2:
        raise UnsupportedChannels(f"mask must be 2-d, got shape {mask.shape}")
    im = Image.fromarray(mask.astype(np.uint8), mode="P")
    im.putpalette(_MASK_PALETTE)
    im.save(path, format="PNG")
