#!/usr/bin/env python3
"""Regenerate the golden protocol vectors consumed by both test suites.

Writes frontend/tests/fixtures/protocol_vectors.json: twenty messages
covering every type in the streaming API, with derived expectations
(decoded mask grids, run totals) for the payload-bearing ones.
"""

import json
from pathlib import Path

import numpy as np

from scopecad.protocol import png_b64_encode, rle_encode

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "frontend" / "tests" / "fixtures" / "protocol_vectors.json"


def mask_vector(name, grid):
    mask = np.array(grid, dtype=np.uint8)
    h, w = mask.shape
    return {
        "name": name,
        "direction": "server",
        "message": {
            "type": "frame_result",
            "index": 4,
            "status": "ok",
            "placement": {"x": 12, "y": -3, "w": w, "h": h},
            "overlay_png": png_b64_encode(np.full((h, w, 3), 64, np.uint8)),
            "mask_rle": rle_encode(mask),
            "mosaic_png": png_b64_encode(np.full((h, w, 3), 32, np.uint8)),
            "lesion_map_png": png_b64_encode(np.zeros((h, w, 3), np.uint8)),
            "mosaic_view_rect": {"x": 0, "y": -3, "w": w + 12, "h": h},
            "timings_ms": {"register": 10.5, "extend": 0.4, "segment": 8.25,
                           "compose": 21.0},
        },
        "expect": {"mask_width": w, "mask_height": h,
                   "mask_sum": int(mask.sum()),
                   "mask_grid": mask.tolist()},
    }


def main():
    rng = np.random.default_rng(8080)
    tiny = rng.integers(0, 256, (3, 4, 3), dtype=np.uint8)

    vectors = [
        {"name": "create_session_minimal", "direction": "client",
         "message": {"type": "create_session",
                     "config": {"backend": "threshold"}}},
        {"name": "create_session_full", "direction": "client",
         "message": {"type": "create_session",
                     "config": {"edge_width": 120, "strategy": "mirror",
                                "backend": "oracle", "slide_id": "demo",
                                "viewport": [640, 480],
                                "registration": {"min_overlap_fraction": 0.05,
                                                 "peak_threshold": 0.04,
                                                 "mad_threshold": 20.0}}}},
        {"name": "create_session_zero_strategy", "direction": "client",
         "message": {"type": "create_session",
                     "config": {"edge_width": 40, "strategy": "zero",
                                "backend": "threshold", "threshold": 180,
                                "min_component_area": 150}}},
        {"name": "create_session_external", "direction": "client",
         "message": {"type": "create_session",
                     "config": {"backend": "external",
                                "model": "models/hydrops.npz"}}},
        {"name": "session_created_plain", "direction": "server",
         "message": {"type": "session_created", "session_id": "s1"}},
        {"name": "session_created_with_slide", "direction": "server",
         "message": {"type": "session_created", "session_id": "s2",
                     "slide": {"id": "demo", "width": 2000, "height": 1500}}},
        {"name": "frame_png_first", "direction": "client",
         "message": {"type": "frame", "session_id": "s1", "index": 0,
                     "png": png_b64_encode(tiny)}},
        {"name": "frame_png_later", "direction": "client",
         "message": {"type": "frame", "session_id": "s1", "index": 7,
                     "png": png_b64_encode(tiny[:, :, 0])}},
        {"name": "frame_center", "direction": "client",
         "message": {"type": "frame", "session_id": "s2", "index": 0,
                     "center": [512.5, 384.0]}},
        {"name": "frame_center_later", "direction": "client",
         "message": {"type": "frame", "session_id": "s2", "index": 3,
                     "center": [700, 420]}},
        mask_vector("frame_result_sparse", [[0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 0]]),
        mask_vector("frame_result_empty_mask", [[0, 0, 0], [0, 0, 0]]),
        mask_vector("frame_result_full_mask", [[1, 1], [1, 1], [1, 1]]),
        mask_vector("frame_result_single_pixel", [[1]]),
        mask_vector("frame_result_checker", [[1, 0, 1], [0, 1, 0], [1, 0, 1]]),
    ]

    degraded = mask_vector("frame_result_degraded", [[0, 0], [1, 0]])
    degraded["message"]["status"] = "degraded"
    degraded["message"]["index"] = 9
    vectors.append(degraded)

    vectors += [
        {"name": "close_session", "direction": "client",
         "message": {"type": "close_session", "session_id": "s1"}},
        {"name": "session_closed", "direction": "server",
         "message": {"type": "session_closed",
                     "exports": {"mosaic_path": "exports/s1/mosaic.png",
                                 "lesion_map_path": "exports/s1/lesion_map.png"}}},
        {"name": "error_unknown_slide", "direction": "server",
         "message": {"type": "error", "message": "unknown slide id 'nope'"}},
        {"name": "error_index_gap", "direction": "server",
         "message": {"type": "error", "message": "expected index 2, got 5"}},
    ]

    assert len(vectors) == 20, len(vectors)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(vectors, indent=1))
    print(f"wrote {len(vectors)} vectors to {OUT}")


if __name__ == "__main__":
    main()
