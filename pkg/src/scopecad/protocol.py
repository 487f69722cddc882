"""Streaming-API wire helpers: run-length mask encoding and PNG payloads.

Messages travel as JSON objects over an ordered bidirectional channel with
binary payloads base64-encoded. ``mask_rle`` is a row-major run-length
string: alternating run lengths starting with a background run, decimal
integers joined by commas, summing to exactly W*H.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import DimensionMismatch


def rle_encode(mask: np.ndarray) -> str:
    """Row-major RLE of a binary mask, first run always background."""
    flat = (np.asarray(mask).ravel() > 0).astype(np.int8)
    if flat.size == 0:
        return "0"
    edges = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return ",".join(str(r) for r in runs)


def rle_decode(encoded: str, width: int, height: int) -> np.ndarray:
    runs = [int(tok) for tok in encoded.split(",")] if encoded else []
    total = sum(runs)
    if total != width * height:
        raise DimensionMismatch(
            f"run lengths sum to {total}, expected {width * height}")
    flat = np.zeros(width * height, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if run < 0:
            raise ValueError("negative run length")
        if value:
            flat[pos:pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(height, width)


def png_b64_encode(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def png_b64_decode(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload)
    with Image.open(io.BytesIO(raw)) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def rect_to_wire(rect) -> dict:
    return {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h}
