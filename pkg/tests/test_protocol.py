import numpy as np
import pytest

from scopecad.errors import DimensionMismatch
from scopecad.protocol import png_b64_decode, png_b64_encode, rle_decode, rle_encode


class TestRle:
    def test_empty_mask_single_background_run(self):
        assert rle_encode(np.zeros((2, 3), np.uint8)) == "6"

    def test_full_mask_starts_with_zero_run(self):
        assert rle_encode(np.ones((2, 2), np.uint8)) == "0,4"

    def test_known_pattern(self):
        mask = np.array([[0, 1, 1, 0], [0, 0, 1, 1]], np.uint8)
        # flat: 0 1 1 0 0 0 1 1 -> runs bg1, fg2, bg3, fg2
        assert rle_encode(mask) == "1,2,3,2"

    def test_total_always_matches(self, rng):
        for _ in range(50):
            h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            mask = (rng.random((h, w)) < 0.5).astype(np.uint8)
            runs = [int(t) for t in rle_encode(mask).split(",")]
            assert sum(runs) == h * w

    def test_round_trip(self, rng):
        for _ in range(200):
            h, w = int(rng.integers(1, 24)), int(rng.integers(1, 24))
            mask = (rng.random((h, w)) < rng.random()).astype(np.uint8)
            assert np.array_equal(rle_decode(rle_encode(mask), w, h), mask)

    def test_decode_rejects_bad_total(self):
        with pytest.raises(DimensionMismatch):
            rle_decode("3,2", 2, 2)


class TestPngPayload:
    def test_gray_round_trip(self, rng):
        img = rng.integers(0, 256, (11, 7), dtype=np.uint8)
        assert np.array_equal(png_b64_decode(png_b64_encode(img)), img)

    def test_rgb_round_trip(self, rng):
        img = rng.integers(0, 256, (5, 9, 3), dtype=np.uint8)
        assert np.array_equal(png_b64_decode(png_b64_encode(img)), img)


class TestGoldenVectors:
    """The wire fixtures shared with the viewer stay reproducible here."""

    @pytest.fixture
    def vectors(self):
        import json
        from pathlib import Path

        path = Path(__file__).parents[1] / "frontend" / "tests" / "fixtures" \
            / "protocol_vectors.json"
        return json.loads(path.read_text())

    def test_twenty_vectors_cover_all_types(self, vectors):
        assert len(vectors) == 20
        types = {v["message"]["type"] for v in vectors}
        assert types == {"create_session", "session_created", "frame",
                         "frame_result", "close_session", "session_closed",
                         "error"}

    def test_mask_rle_payloads_decode_and_reencode(self, vectors):
        for v in vectors:
            msg = v["message"]
            if msg["type"] != "frame_result":
                continue
            exp = v["expect"]
            mask = rle_decode(msg["mask_rle"], exp["mask_width"], exp["mask_height"])
            assert int(mask.sum()) == exp["mask_sum"], v["name"]
            assert mask.tolist() == exp["mask_grid"], v["name"]
            assert rle_encode(mask) == msg["mask_rle"], v["name"]

    def test_png_payloads_decode(self, vectors):
        for v in vectors:
            msg = v["message"]
            if msg["type"] == "frame" and "png" in msg:
                img = png_b64_decode(msg["png"])
                assert img.shape[0] >= 1 and img.shape[1] >= 1
