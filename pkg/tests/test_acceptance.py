"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
Every tolerance is asserted here at its final value; the suite needs no
external data (synthetic slides only).
"""

import io
import time

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from scopecad.errors import Degenerate, DidNotConverge
from scopecad.metrics import connected_components, lesion_metrics, pixel_metrics
from scopecad.mosaic import placement_iou
from scopecad.pipeline import Session, SessionConfig, run_edge_sweep, run_mosaic_experiment
from scopecad.raster import Rect, save_mask_png, save_png
from scopecad.registration import Displacement, register_translation
from scopecad.segment import ThresholdBackend
from scopecad.slidesim import generate_path_frames, serpentine_path, synthetic_slide


def report(name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared synthetic material
# ---------------------------------------------------------------------------

def layered_texture(rng, h, w):
    """Broadband tissue-like texture: coarse structure, fine detail, grain."""
    f = (gaussian_filter(rng.random((h, w), dtype=np.float32), 6.0, truncate=2.5)
         + 0.5 * gaussian_filter(rng.random((h, w), dtype=np.float32), 1.5, truncate=2.5)
         + 0.15 * rng.random((h, w), dtype=np.float32))
    lo, hi = float(f.min()), float(f.max())
    return ((f - lo) / (hi - lo) * 225 + 10).astype(np.uint8)


def crop_shift_pair(rng, size, min_overlap=0.4):
    big = layered_texture(rng, int(2.5 * size), int(2.5 * size))
    x0 = y0 = int(0.75 * size)
    while True:
        dx = int(rng.integers(-size + 1, size))
        dy = int(rng.integers(-size + 1, size))
        if (1 - abs(dx) / size) * (1 - abs(dy) / size) >= min_overlap:
            break
    prev = big[y0:y0 + size, x0:x0 + size].copy()
    cur = big[y0 + dy:y0 + dy + size, x0 + dx:x0 + dx + size].copy()
    return prev, cur, (dx, dy)


@pytest.fixture(scope="module")
def experiment_slide():
    return synthetic_slide(101, 3200, 2000, blobs=40)


# ---------------------------------------------------------------------------
# criterion 1: shift recovery
# ---------------------------------------------------------------------------

def brute_force_argmin_mad(prev, cur, floor_frac=0.05):
    """Mean absolute gray difference over every feasible shift, first argmin."""
    h, w = prev.shape
    a = prev.astype(np.int16)
    b = cur.astype(np.int16)
    floor = floor_frac * w * h
    best = None
    for dy in range(-h + 1, h):
        y0, y1 = max(0, dy), min(h, h + dy)
        for dx in range(-w + 1, w):
            x0, x1 = max(0, dx), min(w, w + dx)
            area = (x1 - x0) * (y1 - y0)
            if area < floor:
                continue
            mad = np.abs(a[y0:y1, x0:x1] - b[y0 - dy:y1 - dy, x0 - dx:x1 - dx]).mean()
            if best is None or mad < best[0]:
                best = (mad, dx, dy)
    return Displacement(best[1], best[2])


def test_shift_recovery():
    started = time.perf_counter()
    rng = np.random.default_rng(1234)
    exact = 0
    for _ in range(1000):
        prev, cur, (dx, dy) = crop_shift_pair(rng, 256)
        if register_translation(prev, cur).displacement == Displacement(dx, dy):
            exact += 1

    rng = np.random.default_rng(4321)
    oracle_agree = 0
    for _ in range(100):
        prev, cur, _ = crop_shift_pair(rng, 64)
        got = register_translation(prev, cur).displacement
        if got == brute_force_argmin_mad(prev, cur):
            oracle_agree += 1
    elapsed = time.perf_counter() - started

    ok = exact >= 990 and oracle_agree == 100 and elapsed < 60.0
    report("shift recovery", ok,
           f"{exact}/1000 exact (need >=990), {oracle_agree}/100 match brute-force "
           f"argmin-MAD oracle (need 100), {elapsed:.1f}s (need <60)")


# ---------------------------------------------------------------------------
# criterion 2: mosaic experiment analog
# ---------------------------------------------------------------------------

def test_mosaic_experiment(experiment_slide):
    slide = experiment_slide
    path = serpentine_path(3200, 2000, 640, 480, 9, 259)
    frames = list(generate_path_frames(slide, path, 640, 480))

    rep1 = run_mosaic_experiment(frames, 1, "m3")
    rep5 = run_mosaic_experiment(frames, 5, "m3")
    frames_d = list(generate_path_frames(slide, path, 640, 480, distortion=True))
    repd = run_mosaic_experiment(frames_d, 1, "m3")
    distorted_rate = repd["error_count"] / repd["pairs"]

    fast_path = serpentine_path(3200, 2000, 640, 480, 60, 60)
    fast_frames = list(generate_path_frames(slide, fast_path, 640, 480))
    rep_m2 = run_mosaic_experiment(fast_frames, 5, "m2")

    ok = (rep1["error_count"] == 0 and rep1["pairs"] == 258
          and rep5["error_count"] == 0 and rep5["pairs"] == 51
          and distorted_rate <= 0.05
          and rep_m2["na_count"] >= 1)
    report("mosaic experiment", ok,
           f"m3 stride1 {rep1['error_count']}/258 errors "
           f"({rep1['mean_ms_per_frame']:.0f} ms/frame), "
           f"stride5 {rep5['error_count']}/51, "
           f"distorted rate {distorted_rate:.3f} (need <=0.05), "
           f"m2 fast-path N/A on {rep_m2['na_count']}/{rep_m2['pairs']} pairs (need >=1)")


# ---------------------------------------------------------------------------
# criterion 3: throughput
# ---------------------------------------------------------------------------

def test_throughput(experiment_slide):
    path = serpentine_path(3200, 2000, 640, 480, 20, 21)
    frames = list(generate_path_frames(experiment_slide, path, 640, 480))
    session = Session("bench", ThresholdBackend(200, min_component_area=150),
                      SessionConfig(edge_width=120, strategy="mirror"))
    session.step(frames[0].pixels)  # warm placement
    steps = []
    register_ms = []
    for ev in frames[1:]:
        t0 = time.perf_counter()
        out = session.step(ev.pixels)
        steps.append((time.perf_counter() - t0) * 1000.0)
        register_ms.append(out.timings_ms["register"])
    mean_step = float(np.mean(steps))
    mean_register = float(np.mean(register_ms))
    ok = mean_step < 500.0
    report("throughput", ok,
           f"mean session step {mean_step:.0f} ms over {len(steps)} frames at 640x480 "
           f"(budget 500); registration stage {mean_register:.0f} ms (informational)")


# ---------------------------------------------------------------------------
# criterion 4: edge-extension ordering
# ---------------------------------------------------------------------------

SWEEP_W, SWEEP_H, TILE_W, TILE_H = 1920, 1440, 640, 480
SWEEP_WIDTHS = (40, 80, 120, 160)


def sweep_blob_centers(seed):
    """Lesion layout with controlled boundary behavior: per sweep width, one
    lesion per tile straddling that width's inset boundary; two interior
    lesions per tile; plus lesions straddling the tile grid itself."""
    rng = np.random.default_rng(seed)
    edge_for_width = {40: "left", 80: "right", 120: "top", 160: "bottom"}
    tiles = [(tx, ty) for tx in range(0, SWEEP_W, TILE_W)
             for ty in range(0, SWEEP_H, TILE_H)]
    centers = []
    for w in SWEEP_WIDTHS:
        edge = edge_for_width[w]
        for tx, ty in tiles:
            jitter = rng.uniform(-3, 0)
            u = rng.uniform(0.3, 0.7)
            if edge == "left":
                centers.append((tx + w + jitter, ty + u * TILE_H))
            elif edge == "right":
                centers.append((tx + TILE_W - w - jitter, ty + u * TILE_H))
            elif edge == "top":
                centers.append((tx + u * TILE_W, ty + w + jitter))
            else:
                centers.append((tx + u * TILE_W, ty + TILE_H - w - jitter))
    for tx, ty in tiles:
        for sx in (240, 400):
            centers.append((tx + sx + rng.uniform(-8, 8),
                            ty + 240 + rng.uniform(-8, 8)))
    xlines = list(range(TILE_W, SWEEP_W, TILE_W))
    ylines = list(range(TILE_H, SWEEP_H, TILE_H))
    for k in range(36):
        if k % 2 == 0:
            centers.append((xlines[(k // 2) % len(xlines)] + rng.uniform(-5, 5),
                            80 + (k * 137) % (SWEEP_H - 160)))
        else:
            centers.append((80 + (k * 211) % (SWEEP_W - 160),
                            ylines[(k // 2) % len(ylines)] + rng.uniform(-5, 5)))
    return centers


def test_edge_extension_ordering():
    slide = synthetic_slide(11, SWEEP_W, SWEEP_H, blob_axes=(26, 29),
                            blob_centers=sweep_blob_centers(11))
    # verify the constructed layout really stresses tile edges
    cs = connected_components(slide.gt_mask, 8)
    xlines = list(range(TILE_W, SWEEP_W, TILE_W))
    ylines = list(range(TILE_H, SWEEP_H, TILE_H))
    straddling = sum(
        1 for r in cs.bboxes
        if any(r.x < gx < r.x2 for gx in xlines) or any(r.y < gy < r.y2 for gy in ylines))
    straddle_frac = straddling / cs.count

    backend = ThresholdBackend(200, min_component_area=1700)
    rows = run_edge_sweep(slide, backend, [0, *SWEEP_WIDTHS],
                          tile_w=TILE_W, tile_h=TILE_H)
    by = {(r["width"], r["strategy"]): r["lesion_iou"] for r in rows}

    mirror_ge_zero = all(by[(w, "mirror")] >= by[(w, "zero")]
                         for w in (0, *SWEEP_WIDTHS))
    zero_seq = [by[(w, "zero")] for w in SWEEP_WIDTHS]
    zero_strictly_decreasing = all(a > b for a, b in zip(zero_seq, zero_seq[1:]))
    gap_at_120 = abs(by[(120, "mirror")] - by[(120, "deleted")])

    ok = (straddle_frac >= 0.30 and mirror_ge_zero
          and zero_strictly_decreasing and gap_at_120 <= 0.02)
    report("edge-extension ordering", ok,
           f"straddle {straddle_frac:.0%} (need >=30%), mirror>=zero at all widths: "
           f"{mirror_ge_zero}, zero {['%.3f' % v for v in zero_seq]} strictly "
           f"decreasing: {zero_strictly_decreasing}, |mirror-deleted|@120 "
           f"{gap_at_120 * 100:.1f} pts (need <=2); reference deltas at width "
           f"120 on the original clinical data: +3.4% pixel, +9% lesion "
           f"(documentation only, not asserted)")


# ---------------------------------------------------------------------------
# criterion 5: metrics oracle equivalence
# ---------------------------------------------------------------------------

def pixel_count_oracle(pred, gt):
    tp = fp = fn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    return iou, recall, precision, tp, fp, fn


def flood_fill_partition(mask, connectivity=8):
    h, w = mask.shape
    seen = [[False] * w for _ in range(h)]
    if connectivity == 8:
        neigh = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neigh = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    parts = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y][x]:
                continue
            stack = [(y, x)]
            seen[y][x] = True
            comp = []
            while stack:
                cy, cx = stack.pop()
                comp.append((cy, cx))
                for dy, dx in neigh:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny][nx]:
                        seen[ny][nx] = True
                        stack.append((ny, nx))
            parts.append(frozenset(comp))
    return parts


def greedy_match_oracle(pred_parts, gt_parts, tau):
    pairs = []
    for pi, pset in enumerate(pred_parts):
        for gi, gset in enumerate(gt_parts):
            inter = len(pset & gset)
            if inter:
                iou = inter / len(pset | gset)
                if iou >= tau:
                    pairs.append((iou, pi, gi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p, used_g, matched = set(), set(), 0
    for iou, pi, gi in pairs:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matched += 1
    return matched, len(pred_parts) - matched, len(gt_parts) - matched


def test_metrics_oracle_equivalence():
    rng = np.random.default_rng(99)
    pixel_exact = cc_exact = lesion_exact = lesion_cases = 0
    N = 10_000
    for _ in range(N):
        h = int(rng.integers(1, 17))
        w = int(rng.integers(1, 17))
        density = rng.uniform(0.1, 0.6)
        pred = (rng.random((h, w)) < density).astype(np.uint8)
        gt = (rng.random((h, w)) < density).astype(np.uint8)

        r = pixel_metrics(pred, gt)
        if (r.iou, r.recall, r.precision, r.tp, r.fp, r.fn) == pixel_count_oracle(pred, gt):
            pixel_exact += 1

        cs = connected_components(pred, 8)
        oracle_parts = flood_fill_partition(pred, 8)
        got_parts = {}
        for y, x in zip(*np.nonzero(cs.labels)):
            got_parts.setdefault(int(cs.labels[y, x]), set()).add((int(y), int(x)))
        if {frozenset(v) for v in got_parts.values()} == set(oracle_parts):
            cc_exact += 1

        gt_parts = flood_fill_partition(gt, 8)
        if len(oracle_parts) <= 4 and len(gt_parts) <= 4:
            lesion_cases += 1
            lr = lesion_metrics(pred, gt, 0.5)
            if (lr.tp, lr.fp, lr.fn) == greedy_match_oracle(oracle_parts, gt_parts, 0.5):
                lesion_exact += 1

    ok = pixel_exact == N and cc_exact == N and lesion_exact == lesion_cases > 0
    report("metrics oracle equivalence", ok,
           f"pixel {pixel_exact}/{N} exact, components {cc_exact}/{N} exact, "
           f"lesion {lesion_exact}/{lesion_cases} exact on <=4-component cases")


# ---------------------------------------------------------------------------
# criterion 6: placement IoU properties
# ---------------------------------------------------------------------------

def rect_iou_pixel_oracle(a: Rect, b: Rect):
    x0 = min(a.x, b.x)
    y0 = min(a.y, b.y)
    x1 = max(a.x2, b.x2)
    y1 = max(a.y2, b.y2)
    inter = union = 0
    for y in range(y0, y1):
        for x in range(x0, x1):
            ina = a.x <= x < a.x2 and a.y <= y < a.y2
            inb = b.x <= x < b.x2 and b.y <= y < b.y2
            inter += ina and inb
            union += ina or inb
    return 1.0 if union == 0 else inter / union


def test_placement_iou_properties():
    rng = np.random.default_rng(7)
    exact = 0
    symmetric = identity_rule = disjoint_rule = True
    for _ in range(1000):
        a = Rect(int(rng.integers(-15, 15)), int(rng.integers(-15, 15)),
                 int(rng.integers(0, 18)), int(rng.integers(0, 18)))
        b = Rect(int(rng.integers(-15, 15)), int(rng.integers(-15, 15)),
                 int(rng.integers(0, 18)), int(rng.integers(0, 18)))
        got = placement_iou(a, b)
        if got == rect_iou_pixel_oracle(a, b):
            exact += 1
        symmetric &= got == placement_iou(b, a)
        if a.area and b.area:
            identity_rule &= (got == 1.0) == (a == b)
            disjoint_rule &= (got == 0.0) == (a.intersect(b).area == 0)
    ok = exact == 1000 and symmetric and identity_rule and disjoint_rule
    report("placement IoU properties", ok,
           f"{exact}/1000 match the pixel-count oracle exactly; symmetric: "
           f"{symmetric}; ==1 iff identical: {identity_rule}; ==0 iff disjoint: "
           f"{disjoint_rule}")


# ---------------------------------------------------------------------------
# criterion 7: pipeline determinism
# ---------------------------------------------------------------------------

def _png_bytes(array, mask=False):
    buf = io.BytesIO()
    if mask:
        save_mask_png(buf, array)
    else:
        save_png(buf, array)
    return buf.getvalue()


def test_pipeline_determinism(experiment_slide):
    path = serpentine_path(3200, 2000, 640, 480, 25, 50)
    frames = list(generate_path_frames(experiment_slide, path, 640, 480))
    assert len(frames) == 50

    def run_once():
        session = Session("det", ThresholdBackend(200, min_component_area=150),
                          SessionConfig(edge_width=120, strategy="mirror"))
        for ev in frames:
            session.step(ev.pixels)
        (mosaic, mosaic_valid), (lesion, lesion_valid) = session.exports()
        return (_png_bytes(mosaic), _png_bytes((mosaic_valid * 255).astype(np.uint8)),
                _png_bytes(lesion, mask=True),
                _png_bytes((lesion_valid * 255).astype(np.uint8)))

    first = run_once()
    second = run_once()
    same = all(x == y for x, y in zip(first, second))
    report("pipeline determinism", same,
           f"50-frame replay exports byte-identical: {same} "
           f"(mosaic {len(first[0])} bytes, lesion map {len(first[2])} bytes)")


# ---------------------------------------------------------------------------
# criterion 8: degraded-step safety
# ---------------------------------------------------------------------------

def test_degraded_step_safety(experiment_slide):
    path = serpentine_path(3200, 2000, 640, 480, 25, 6)
    frames = list(generate_path_frames(experiment_slide, path, 640, 480))
    session = Session("deg", ThresholdBackend(200, min_component_area=150),
                      SessionConfig(edge_width=80, strategy="mirror"))
    for ev in frames[:4]:
        out = session.step(ev.pixels)
        assert out.status == "ok"

    mosaic_before = _png_bytes(session.exports()[0][0])
    lesion_before = _png_bytes(session.exports()[1][0], mask=True)
    noise = np.random.default_rng(0).integers(0, 256, (480, 640, 3), dtype=np.uint8)
    degraded = session.step(noise)
    mosaic_after = _png_bytes(session.exports()[0][0])
    lesion_after = _png_bytes(session.exports()[1][0], mask=True)

    resumed = session.step(frames[4].pixels)
    t3 = frames[3].true_placement
    t4 = frames[4].true_placement
    expected_rect = Rect(t4.x - frames[0].true_placement.x,
                         t4.y - frames[0].true_placement.y, 640, 480)

    ok = (degraded.status == "degraded"
          and mosaic_before == mosaic_after and lesion_before == lesion_after
          and resumed.status == "ok" and resumed.placement == expected_rect)
    report("degraded-step safety", ok,
           f"noise frame status {degraded.status}, canvases byte-identical: "
           f"{mosaic_before == mosaic_after and lesion_before == lesion_after}, "
           f"next frame re-anchored {resumed.status} at {resumed.placement}")
