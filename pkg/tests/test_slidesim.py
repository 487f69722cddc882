import numpy as np
import pytest

from scopecad.errors import ViewportLargerThanSlide
from scopecad.raster import Rect, to_luminance
from scopecad.registration import Displacement, register_translation
from scopecad.segment import threshold_segment
from scopecad.slidesim import (
    VirtualSlide,
    generate_path_frames,
    rolling_shutter_distort,
    serpentine_path,
    synthetic_slide,
    viewport_frame,
)


@pytest.fixture(scope="module")
def slide():
    return synthetic_slide(3, 1200, 900, blobs=20)


class TestViewport:
    def test_centered_crop(self, slide):
        pixels, rect = viewport_frame(slide, (600, 450), 200, 100)
        assert rect == Rect(500, 400, 200, 100)
        assert np.array_equal(pixels, slide.image[400:500, 500:700])

    def test_clamped_at_origin(self, slide):
        _, rect = viewport_frame(slide, (0, 0), 200, 100)
        assert rect == Rect(0, 0, 200, 100)

    def test_clamped_at_far_edge(self, slide):
        _, rect = viewport_frame(slide, (5000, 5000), 200, 100)
        assert rect == Rect(1000, 800, 200, 100)

    def test_viewport_too_large(self, slide):
        with pytest.raises(ViewportLargerThanSlide):
            viewport_frame(slide, (0, 0), 2000, 100)


class TestRollingShutter:
    def test_zero_velocity_identity(self, rng):
        frame = rng.integers(0, 256, (40, 50, 3), dtype=np.uint8)
        assert np.array_equal(rolling_shutter_distort(frame, (0, 0)), frame)

    def test_full_height_velocity_per_row_shift(self, rng):
        h, w = 32, 64
        frame = rng.integers(0, 256, (h, w), dtype=np.uint8)
        out = rolling_shutter_distort(frame, (h, 0))
        for r in range(h):
            # oracle: each row shifted by exactly r pixels, edge clamped
            expected = frame[r, np.clip(np.arange(w) + r, 0, w - 1)]
            assert np.array_equal(out[r], expected), r

    def test_stripes_become_slanted(self):
        frame = np.zeros((40, 80), np.uint8)
        frame[:, ::8] = 255
        out = rolling_shutter_distort(frame, (10.0, 0.0))
        # top row unshifted, bottom row shifted by round(10 * 39/40) = 10
        assert out[0, 8] == 255
        assert out[39, 8 + 8] == 0  # original stripe position moved
        assert out[39, 16 - 10] == 255

    def test_vertical_component(self, rng):
        h, w = 24, 24
        frame = rng.integers(0, 256, (h, w), dtype=np.uint8)
        out = rolling_shutter_distort(frame, (0, h))
        for r in range(h):
            src = min(r + r, h - 1)
            assert np.array_equal(out[r], frame[src]), r


class TestPathFrames:
    def test_single_point(self, slide):
        events = list(generate_path_frames(slide, [(600, 450)], 200, 100))
        assert len(events) == 1 and events[0].timestamp_ms == 0

    def test_timestamps_at_2fps(self, slide):
        path = [(600 + 10 * i, 450) for i in range(5)]
        events = list(generate_path_frames(slide, path, 200, 100, fps=2))
        assert [e.timestamp_ms for e in events] == [0, 500, 1000, 1500, 2000]
        assert [e.index for e in events] == [0, 1, 2, 3, 4]

    def test_constant_path_identical_frames(self, slide):
        events = list(generate_path_frames(slide, [(600, 450)] * 4, 200, 100,
                                           distortion=True))
        for e in events[1:]:
            assert np.array_equal(e.pixels, events[0].pixels)

    def test_true_placement_deltas_follow_path(self, slide):
        path = [(600, 450), (640, 450), (640, 480)]
        events = list(generate_path_frames(slide, path, 200, 100))
        deltas = [(b.true_placement.x - a.true_placement.x,
                   b.true_placement.y - a.true_placement.y)
                  for a, b in zip(events, events[1:])]
        assert deltas == [(40, 0), (0, 30)]

    def test_registration_recovers_exact_path_delta(self, slide):
        path = [(600, 450), (630, 430)]
        events = list(generate_path_frames(slide, path, 320, 240))
        r = register_translation(events[0].pixels, events[1].pixels)
        assert r.displacement == Displacement(30, -20)
        assert r.status == "ok"

    def test_empty_path_rejected(self, slide):
        with pytest.raises(ValueError):
            list(generate_path_frames(slide, [], 100, 100))


class TestSyntheticSlide:
    def test_deterministic(self):
        a = synthetic_slide(9, 600, 400, blobs=8)
        b = synthetic_slide(9, 600, 400, blobs=8)
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.gt_mask, b.gt_mask)

    def test_threshold_reproduces_ground_truth(self, slide):
        # blobs live strictly above luminance 200, tissue strictly below
        assert np.array_equal(threshold_segment(slide.image, 200), slide.gt_mask)

    def test_luminance_margins(self, slide):
        lum = to_luminance(slide.image)
        assert lum[slide.gt_mask > 0].min() >= 205
        assert lum[slide.gt_mask == 0].max() <= 195

    def test_has_blobs(self, slide):
        assert slide.gt_mask.sum() > 1000

    def test_distortion_bound_on_smooth_image(self, rng):
        # velocities below a tenth of the frame dims only mildly perturb a
        # gently varying frame, yet the skew is not a no-op
        from scipy.ndimage import gaussian_filter

        field = gaussian_filter(rng.random((240, 320)), 24)
        img = ((field - field.min()) / (field.max() - field.min()) * 24 + 80) \
            .astype(np.uint8)
        for velocity in [(31, 23), (-31, -23), (16, 8)]:
            out = rolling_shutter_distort(img, velocity)
            assert out.shape == img.shape
            delta = np.abs(img.astype(int) - out.astype(int))
            assert (delta > 5).mean() < 0.2
            assert (delta > 0).mean() > 0.1


def test_serpentine_path_stays_inside():
    path = serpentine_path(1200, 900, 200, 100, 30, 200)
    assert len(path) == 200
    for x, y in path:
        assert 100 <= x <= 1100 and 50 <= y <= 850
