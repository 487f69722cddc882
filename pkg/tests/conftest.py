import numpy as np
import pytest
from scipy.ndimage import gaussian_filter


def textured(rng: np.random.Generator, h: int, w: int, sigma: float = 1.5) -> np.ndarray:
    """Random texture with both coarse structure and fine detail."""
    field = gaussian_filter(rng.random((h, w)), sigma)
    lo, hi = field.min(), field.max()
    out = (field - lo) / (hi - lo) * 225 + 10
    return out.astype(np.uint8)


def crop_shift_pair(rng: np.random.Generator, w: int, h: int,
                    min_overlap: float = 0.4):
    """Two windows cropped from one texture, related by a known shift.

    Returns (prev, cur, (dx, dy)) with the current frame's top-left at
    (dx, dy) in the previous frame's coordinates and overlap fraction at
    least ``min_overlap``.
    """
    big = textured(rng, 3 * h, 3 * w)
    while True:
        dx = int(rng.integers(-w + 1, w))
        dy = int(rng.integers(-h + 1, h))
        if (1 - abs(dx) / w) * (1 - abs(dy) / h) >= min_overlap:
            break
    x0 = w
    y0 = h
    prev = big[y0:y0 + h, x0:x0 + w].copy()
    cur = big[y0 + dy:y0 + dy + h, x0 + dx:x0 + dx + w].copy()
    return prev, cur, (dx, dy)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
