"""Edge extension of a frame with historical-mosaic context.

The extended image is (W+2w) x (H+2w): the frame sits untouched in the
center, the border ring takes mosaic context wherever the context window is
valid, and the remaining gaps are filled either with zeros or with a
symmetric reflection of the frame across its nearest edge. Reflection reads
interior index e-1 for offset e beyond an edge (the edge pixel itself is not
repeated) and keeps folding when the ring is wider than the frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .raster import channel_count, dims

STRATEGY_ZERO = "zero"
STRATEGY_MIRROR = "mirror"

PROVENANCE_FRAME = 0
PROVENANCE_MOSAIC = 1
PROVENANCE_FILL = 2


@dataclass
class ExtendedFrame:
    pixels: np.ndarray
    width_used: int
    provenance: np.ndarray  # uint8 codes per pixel


def empty_context(frame: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    """A fully invalid context window for fill-only extension."""
    fw, fh = dims(frame)
    shape = (fh + 2 * w, fw + 2 * w)
    if channel_count(frame) == 3:
        pixels = np.zeros(shape + (3,), dtype=np.uint8)
    else:
        pixels = np.zeros(shape, dtype=np.uint8)
    return pixels, np.zeros(shape, dtype=bool)


def extend_frame(
    frame: np.ndarray,
    context_pixels: np.ndarray,
    context_valid: np.ndarray,
    w: int,
    strategy: str = STRATEGY_MIRROR,
) -> ExtendedFrame:
    if w < 0:
        raise ValueError(f"extension width must be >= 0, got {w}")
    if strategy not in (STRATEGY_ZERO, STRATEGY_MIRROR):
        raise ValueError(f"unknown strategy {strategy!r}")
    fw, fh = dims(frame)
    ew, eh = fw + 2 * w, fh + 2 * w
    if dims(context_pixels) != (ew, eh) or context_valid.shape != (eh, ew):
        raise DimensionMismatch(
            f"context must be {ew}x{eh} for w={w}, got {dims(context_pixels)}")
    if channel_count(context_pixels) != channel_count(frame):
        raise DimensionMismatch("context channels do not match frame")

    channels = channel_count(frame)
    pad_spec = ((w, w), (w, w)) if channels == 1 else ((w, w), (w, w), (0, 0))
    if strategy == STRATEGY_MIRROR and w > 0:
        pixels = np.pad(frame, pad_spec, mode="symmetric")
    else:
        pixels = np.pad(frame, pad_spec, mode="constant")

    provenance = np.full((eh, ew), PROVENANCE_FILL, dtype=np.uint8)
    provenance[w:w + fh, w:w + fw] = PROVENANCE_FRAME

    ring = np.ones((eh, ew), dtype=bool)
    ring[w:w + fh, w:w + fw] = False
    take_mosaic = ring & context_valid
    if take_mosaic.any():
        pixels[take_mosaic] = context_pixels[take_mosaic]
        provenance[take_mosaic] = PROVENANCE_MOSAIC

    return ExtendedFrame(pixels, w, provenance)


def crop_back(mask: np.ndarray, w: int) -> np.ndarray:
    """Remove the extension ring, returning the central frame-sized mask."""
    if w < 0:
        raise ValueError(f"extension width must be >= 0, got {w}")
    if w == 0:
        return mask.copy()
    h, ww = mask.shape[:2]
    if h <= 2 * w or ww <= 2 * w:
        raise DimensionMismatch(
            f"mask {ww}x{h} too small to remove a ring of width {w}")
    return mask[w:h - w, w:ww - w].copy()
