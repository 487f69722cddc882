"""Lesion segmentation backends and the extended-inference pipeline.

A lesion mask is a uint8 array matching its raster, label 0 for background
and 1 for hydrops (values 2 and 3 are reserved for future label classes).
Backends are deterministic: equal inputs always give byte-identical masks.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.ndimage

from . import _kernels
from .errors import BackendFailure, DimensionMismatch, OutOfBounds
from .extend import crop_back, extend_frame
from .raster import Rect, channel_count, dims, promote_rgb, resample, to_luminance

POLARITY_BRIGHT = "bright"
POLARITY_DARK = "dark"

LABEL_BACKGROUND = 0
LABEL_HYDROPS = 1


def threshold_segment(
    image: np.ndarray,
    threshold: int,
    polarity: str = POLARITY_BRIGHT,
    min_component_area: int = 0,
) -> np.ndarray:
    """Luminance threshold plus removal of small 8-connected components."""
    gray = to_luminance(image)
    if polarity == POLARITY_BRIGHT:
        fg = gray >= threshold
    elif polarity == POLARITY_DARK:
        fg = gray <= threshold
    else:
        raise ValueError(f"unknown polarity {polarity!r}")
    mask = fg.astype(np.uint8)
    if min_component_area > 1 and mask.any():
        labels = _kernels.label_components(mask, 8)
        areas = np.bincount(labels.ravel())
        keep = areas >= min_component_area
        keep[0] = False
        mask = keep[labels].astype(np.uint8)
    return mask


def oracle_segment(slide_mask: np.ndarray, placement: Rect) -> np.ndarray:
    """Ground-truth lookup: crop of the slide mask at a placement rect."""
    w, h = dims(slide_mask)
    if placement.x < 0 or placement.y < 0 or placement.x2 > w or placement.y2 > h:
        raise OutOfBounds(f"placement {placement} exceeds slide mask {w}x{h}")
    return (slide_mask[placement.y:placement.y2, placement.x:placement.x2]
            == LABEL_HYDROPS).astype(np.uint8)


class ThresholdBackend:
    """Classical stand-in for the trained model; context sensitive only
    through its minimum component area."""

    def __init__(self, threshold: int = 200, polarity: str = POLARITY_BRIGHT,
                 min_component_area: int = 0):
        self.threshold = threshold
        self.polarity = polarity
        self.min_component_area = min_component_area
        self.input_size = (0, 0)  # native, no resampling

    @property
    def name(self) -> str:
        return f"threshold:{self.threshold}:{self.polarity}:{self.min_component_area}"

    def segment(self, image: np.ndarray, rect: Rect | None = None) -> np.ndarray:
        return threshold_segment(image, self.threshold, self.polarity,
                                 self.min_component_area)


class OracleBackend:
    """Ground-truth backend for pipeline tests.

    ``origin`` maps session-global coordinates (first frame at (0, 0)) into
    slide coordinates; rects falling outside the slide read as background.
    """

    name = "oracle"
    input_size = (0, 0)

    def __init__(self, slide_mask: np.ndarray, origin: tuple[int, int] = (0, 0)):
        self.slide_mask = slide_mask
        self.origin = origin

    def segment(self, image: np.ndarray, rect: Rect | None = None) -> np.ndarray:
        if rect is None:
            raise BackendFailure("oracle backend requires a placement rect")
        w, h = dims(image)
        if (rect.w, rect.h) != (w, h):
            raise DimensionMismatch(f"rect {rect} does not match image {w}x{h}")
        slide_rect = rect.shift(self.origin[0], self.origin[1])
        sw, sh = dims(self.slide_mask)
        out = np.zeros((h, w), dtype=np.uint8)
        inter = slide_rect.intersect(Rect(0, 0, sw, sh))
        if inter.area:
            crop = oracle_segment(self.slide_mask, inter)
            out[inter.y - slide_rect.y:inter.y2 - slide_rect.y,
                inter.x - slide_rect.x:inter.x2 - slide_rect.x] = crop
        return out


class ExternalBackend:
    """Adapter for an opaque serialized model.

    Two formats are supported:

    * ``.onnx`` via onnxruntime when installed. Tensor layout: float32 NCHW,
      RGB scaled to [0, 1]; the first output channel is a logit map and
      positives become hydrops labels.
    * ``.npz`` with keys ``kernel`` (KxK float32), ``scale``, ``bias``,
      ``input_w``, ``input_h``: the luminance in [0, 1] is correlated with
      the kernel (nearest-edge padding) and ``scale * response + bias > 0``
      becomes the mask. This is the format used by the test fixtures.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.name = f"external:{self.path.stem}"
        if self.path.suffix == ".npz":
            data = np.load(self.path)
            self._kernel = data["kernel"].astype(np.float64)
            self._scale = float(data["scale"])
            self._bias = float(data["bias"])
            self.input_size = (int(data["input_w"]), int(data["input_h"]))
            self._session = None
        elif self.path.suffix == ".onnx":
            try:
                import onnxruntime
            except ImportError as exc:
                raise BackendFailure("onnxruntime is required for .onnx models") from exc
            self._session = onnxruntime.InferenceSession(str(self.path))
            shape = self._session.get_inputs()[0].shape  # NCHW
            self.input_size = (int(shape[3]), int(shape[2]))
        else:
            raise BackendFailure(f"unsupported model format {self.path.suffix!r}")

    def segment(self, image: np.ndarray, rect: Rect | None = None) -> np.ndarray:
        if self._session is not None:
            rgb = promote_rgb(image).astype(np.float32) / 255.0
            tensor = rgb.transpose(2, 0, 1)[None]
            name = self._session.get_inputs()[0].name
            logits = self._session.run(None, {name: tensor})[0][0, 0]
            return (logits > 0).astype(np.uint8)
        gray = to_luminance(image).astype(np.float64) / 255.0
        response = scipy.ndimage.correlate(gray, self._kernel, mode="nearest")
        return (self._scale * response + self._bias > 0).astype(np.uint8)


def segment(backend, image: np.ndarray, rect: Rect | None = None) -> np.ndarray:
    """Run a backend, enforcing its input-size contract and output dims."""
    in_w, in_h = backend.input_size
    w, h = dims(image)
    if (in_w, in_h) != (0, 0) and (w, h) != (in_w, in_h):
        raise DimensionMismatch(
            f"backend {backend.name} expects {in_w}x{in_h} input, got {w}x{h}")
    mask = backend.segment(image, rect)
    if mask.shape[:2] != image.shape[:2]:
        raise BackendFailure(
            f"backend {backend.name} returned {mask.shape[:2]} for input {image.shape[:2]}")
    return mask


def resize_mask_nearest(mask: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Nearest-neighbor mask rescaling; labels are never interpolated."""
    h, w = mask.shape
    if (w, h) == (target_width, target_height):
        return mask.copy()
    ys = np.minimum(((np.arange(target_height) + 0.5) * (h / target_height)).astype(np.intp), h - 1)
    xs = np.minimum(((np.arange(target_width) + 0.5) * (w / target_width)).astype(np.intp), w - 1)
    return mask[np.ix_(ys, xs)]


def segment_extended(
    backend,
    frame: np.ndarray,
    context_pixels: np.ndarray,
    context_valid: np.ndarray,
    w: int,
    strategy: str,
    frame_rect: Rect | None = None,
) -> np.ndarray:
    """Edge-extend, scale to the backend input, segment, scale back, crop.

    Returns a mask over the original frame dims regardless of the extension
    width, strategy, or backend input size.
    """
    extended = extend_frame(frame, context_pixels, context_valid, w, strategy)
    pixels = extended.pixels
    ew, eh = dims(pixels)
    ext_rect = frame_rect.inflate(w) if frame_rect is not None else None

    in_w, in_h = backend.input_size
    if (in_w, in_h) != (0, 0) and (ew, eh) != (in_w, in_h):
        mask = segment(backend, resample(pixels, in_w, in_h), ext_rect)
        mask = resize_mask_nearest(mask, ew, eh)
    else:
        mask = segment(backend, pixels, ext_rect)
    return crop_back(mask, w)


def render_overlay(
    frame: np.ndarray, mask: np.ndarray, color: tuple[int, int, int] = (0, 255, 0)
) -> np.ndarray:
    """Draw 1-px lesion contours over the frame (promoted to RGB).

    A contour pixel is a lesion pixel with at least one 8-neighbor that is
    background; pixels beyond the image edge count as background, so a
    full-frame mask draws the frame's border ring.
    """
    if mask.shape[:2] != frame.shape[:2]:
        raise DimensionMismatch(
            f"mask {mask.shape[:2]} does not match frame {frame.shape[:2]}")
    out = promote_rgb(frame)
    fg = mask > 0
    if not fg.any():
        return out
    padded = np.pad(fg, 1, mode="constant")
    neighbor_all = np.ones_like(fg)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            h, w = fg.shape
            neighbor_all &= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    contour = fg & ~neighbor_all
    out[contour] = color
    return out
