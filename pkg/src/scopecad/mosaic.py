"""Growable composite canvases for the historical view and lesion map.

A canvas stores pixels plus a per-pixel validity mask in a backing array that
doubles along whichever axis runs out of room, up to a hard cap. Global
coordinates are anchored at the first frame's top-left corner and never move
when the backing storage grows. Overlapping writes always take the newest
frame's pixels; there is no blending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CanvasLimitExceeded
from .raster import Rect, channel_count, dims
from .registration import Displacement

DEFAULT_MAX_DIMS = (16384, 16384)


@dataclass(frozen=True)
class Placement:
    rect: Rect
    frame_index: int


def placement_iou(a: Rect, b: Rect) -> float:
    """Area overlap ratio of two rects; two empty rects count as identical."""
    inter = a.intersect(b).area
    union = a.area + b.area - inter
    if union == 0:
        return 1.0
    return inter / union


class MosaicCanvas:
    """Single-writer growable canvas with per-pixel validity."""

    def __init__(self, channels: int = 1, max_dims: tuple[int, int] = DEFAULT_MAX_DIMS):
        if channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {channels}")
        self.channels = channels
        self.max_dims = max_dims
        self._pixels: np.ndarray | None = None
        self._valid: np.ndarray | None = None
        self._origin = (0, 0)  # global coords of storage pixel (0, 0)
        self._content: Rect | None = None  # bounding box of everything written

    @property
    def origin(self) -> tuple[int, int]:
        return self._origin

    @property
    def storage_dims(self) -> tuple[int, int]:
        if self._pixels is None:
            return (0, 0)
        return dims(self._pixels)

    @property
    def content_bbox(self) -> Rect | None:
        return self._content

    @property
    def valid_count(self) -> int:
        return 0 if self._valid is None else int(self._valid.sum())

    def _alloc(self, w: int, h: int) -> np.ndarray:
        shape = (h, w) if self.channels == 1 else (h, w, 3)
        return np.zeros(shape, dtype=np.uint8)

    def _required_span(self, rect: Rect):
        if self._pixels is None:
            return rect.x, rect.y, rect.w, rect.h
        ox, oy = self._origin
        sw, sh = self.storage_dims
        x0 = min(ox, rect.x)
        y0 = min(oy, rect.y)
        x1 = max(ox + sw, rect.x2)
        y1 = max(oy + sh, rect.y2)
        return x0, y0, x1 - x0, y1 - y0

    def would_exceed(self, rect: Rect) -> bool:
        _, _, w, h = self._required_span(rect)
        return w > self.max_dims[0] or h > self.max_dims[1]

    def _ensure_capacity(self, rect: Rect):
        x0, y0, need_w, need_h = self._required_span(rect)
        if need_w > self.max_dims[0] or need_h > self.max_dims[1]:
            raise CanvasLimitExceeded(
                f"required span {need_w}x{need_h} exceeds cap "
                f"{self.max_dims[0]}x{self.max_dims[1]}")
        if self._pixels is None:
            self._pixels = self._alloc(need_w, need_h)
            self._valid = np.zeros((need_h, need_w), dtype=bool)
            self._origin = (x0, y0)
            return
        sw, sh = self.storage_dims
        if x0 >= self._origin[0] and y0 >= self._origin[1] \
                and x0 + need_w <= self._origin[0] + sw and y0 + need_h <= self._origin[1] + sh:
            return
        new_w, new_h = sw, sh
        while new_w < need_w:
            new_w = min(new_w * 2, self.max_dims[0])
        while new_h < need_h:
            new_h = min(new_h * 2, self.max_dims[1])
        pixels = self._alloc(new_w, new_h)
        valid = np.zeros((new_h, new_w), dtype=bool)
        off_x = self._origin[0] - x0
        off_y = self._origin[1] - y0
        pixels[off_y:off_y + sh, off_x:off_x + sw] = self._pixels
        valid[off_y:off_y + sh, off_x:off_x + sw] = self._valid
        self._pixels = pixels
        self._valid = valid
        self._origin = (x0, y0)

    def write_region(self, rect: Rect, pixels: np.ndarray):
        """Overwrite the canvas at a global rect; newest content wins."""
        if dims(pixels) != (rect.w, rect.h):
            raise ValueError(f"pixel dims {dims(pixels)} do not match rect {rect}")
        if channel_count(pixels) != self.channels:
            raise ValueError("channel count does not match canvas")
        self._ensure_capacity(rect)
        ox, oy = self._origin
        sx, sy = rect.x - ox, rect.y - oy
        self._pixels[sy:sy + rect.h, sx:sx + rect.w] = pixels
        self._valid[sy:sy + rect.h, sx:sx + rect.w] = True
        if self._content is None:
            self._content = rect
        else:
            c = self._content
            x0, y0 = min(c.x, rect.x), min(c.y, rect.y)
            x1, y1 = max(c.x2, rect.x2), max(c.y2, rect.y2)
            self._content = Rect(x0, y0, x1 - x0, y1 - y0)

    def place_frame(
        self,
        frame: np.ndarray,
        relative: Displacement | None = None,
        prev_placement: Placement | None = None,
        frame_index: int = 0,
    ) -> Placement:
        """Place a frame relative to the previous placement (or at the global
        origin for the first frame of a session)."""
        w, h = dims(frame)
        if prev_placement is None:
            rect = Rect(0, 0, w, h)
        else:
            if relative is None:
                raise ValueError("relative displacement required after the first frame")
            rect = Rect(prev_placement.rect.x + relative.dx,
                        prev_placement.rect.y + relative.dy, w, h)
        self.write_region(rect, frame)
        return Placement(rect, frame_index)

    def window(self, region: Rect) -> tuple[np.ndarray, np.ndarray]:
        """Read a region in global coordinates.

        Pixels never written (or outside storage) come back as 0 with
        valid=False; the region may extend past the canvas freely.
        """
        shape = (region.h, region.w) if self.channels == 1 else (region.h, region.w, 3)
        out = np.zeros(shape, dtype=np.uint8)
        valid = np.zeros((region.h, region.w), dtype=bool)
        if self._pixels is None or region.area == 0:
            return out, valid
        ox, oy = self._origin
        sw, sh = self.storage_dims
        storage_rect = Rect(ox, oy, sw, sh)
        inter = region.intersect(storage_rect)
        if inter.area == 0:
            return out, valid
        src_x, src_y = inter.x - ox, inter.y - oy
        dst_x, dst_y = inter.x - region.x, inter.y - region.y
        out[dst_y:dst_y + inter.h, dst_x:dst_x + inter.w] = \
            self._pixels[src_y:src_y + inter.h, src_x:src_x + inter.w]
        valid[dst_y:dst_y + inter.h, dst_x:dst_x + inter.w] = \
            self._valid[src_y:src_y + inter.h, src_x:src_x + inter.w]
        return out, valid

    def export(self) -> tuple[np.ndarray, np.ndarray, Rect]:
        """Snapshot of the written content: pixels, validity, global rect."""
        if self._content is None:
            shape = (1, 1) if self.channels == 1 else (1, 1, 3)
            return np.zeros(shape, np.uint8), np.zeros((1, 1), bool), Rect(0, 0, 1, 1)
        pixels, valid = self.window(self._content)
        return pixels, valid, self._content


def place_frame(canvas, frame, relative=None, prev_placement=None, frame_index=0):
    return canvas.place_frame(frame, relative, prev_placement, frame_index)


def mosaic_window(canvas: MosaicCanvas, region: Rect):
    return canvas.window(region)


def compose_lesion_map(lesion_canvas: MosaicCanvas, mask: np.ndarray, placement: Placement):
    """Write a frame's lesion mask at its placement, newest labels winning."""
    if dims(mask) != (placement.rect.w, placement.rect.h):
        raise ValueError(
            f"mask dims {dims(mask)} do not match placement {placement.rect}")
    lesion_canvas.write_region(placement.rect, mask)
