"""Per-frame session orchestration and the experiment harnesses.

Each session step registers the incoming frame against the last good frame,
places it on the historical canvas, segments it with edge-extended context,
composes the lesion map, and renders the labeled live view. Steps are atomic:
all canvas and anchor mutations happen only after every stage has succeeded,
so a failed step leaves the session exactly as it was.

On a degraded registration (weak correlation peak, implausible overlap
difference, or no overlapping candidate at all) the canvases are frozen, the
frame is segmented with fill-only context, and the next frame still registers
against the last good frame from the last good placement.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CanvasLimitExceeded, MissingGroundTruth, NoOverlap, ScopeCadError
from .extend import STRATEGY_MIRROR, empty_context
from .features import FeatureConfig, detect_and_describe, match_and_estimate
from .metrics import _ratios, lesion_metrics, pixel_metrics
from .mosaic import MosaicCanvas, Placement, placement_iou
from .raster import Rect, channel_count, dims, resample, to_luminance
from .registration import (
    STATUS_DEGRADED,
    STATUS_OK,
    AffineConfig,
    Displacement,
    RegistrationConfig,
    affine_register,
    cross_power_surface,
    displacement_from_matrix,
    resolve_translation,
)
from .segment import ThresholdBackend, render_overlay, resize_mask_nearest, segment, segment_extended
from .slidesim import FrameEvent, VirtualSlide

log = logging.getLogger(__name__)

ALGO_FEATURES = "m1"
ALGO_AFFINE = "m2"
ALGO_FOURIER = "m3"

SWEEP_STRATEGIES = ("deleted", "unchanged", "zero", "mirror")


@dataclass
class SessionConfig:
    edge_width: int = 120
    strategy: str = STRATEGY_MIRROR
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    fps: float = 2.0
    max_canvas_dims: tuple[int, int] = (16384, 16384)
    snapshot_max_side: int = 1024
    overlay_color: tuple[int, int, int] = (0, 255, 0)


@dataclass
class PipelineOutputs:
    labeled_view: np.ndarray
    placement: Rect
    mosaic_view: np.ndarray
    lesion_map_view: np.ndarray
    mask: np.ndarray
    timings_ms: dict
    status: str
    frame_index: int
    mosaic_view_rect: Rect  # global rect the mosaic snapshot covers


def _downscale_view(view: np.ndarray, max_side: int) -> np.ndarray:
    w, h = dims(view)
    side = max(w, h)
    if side <= max_side:
        return view
    scale = max_side / side
    return resample(view, max(1, int(round(w * scale))), max(1, int(round(h * scale))))


def _lesion_view(lesion_canvas: MosaicCanvas, color=(0, 255, 0)) -> np.ndarray:
    pixels, valid, _ = lesion_canvas.export()
    view = np.zeros(pixels.shape + (3,), dtype=np.uint8)
    view[(pixels > 0) & valid] = color
    return view


class Session:
    def __init__(self, session_id: str, backend=None, config: SessionConfig | None = None):
        self.id = session_id
        self.config = config or SessionConfig()
        self.backend = backend or ThresholdBackend()
        self.canvas: MosaicCanvas | None = None
        self.lesion_canvas: MosaicCanvas | None = None
        self.last_frame: np.ndarray | None = None
        self.last_gray: np.ndarray | None = None
        self.last_placement: Placement | None = None
        self.frame_count = 0
        self.timing_log: list[dict] = []

    @property
    def next_index(self) -> int:
        return self.frame_count

    def step(self, frame: np.ndarray) -> PipelineOutputs:
        cfg = self.config
        w, h = dims(frame)
        if self.last_frame is not None and dims(self.last_frame) != (w, h):
            raise ScopeCadError(
                f"frame dims changed mid-session: {dims(self.last_frame)} -> {(w, h)}")
        index = self.frame_count
        gray = to_luminance(frame)

        t0 = time.perf_counter()
        if self.last_placement is None:
            rect = Rect(0, 0, w, h)
            status = STATUS_OK
        else:
            try:
                surface = cross_power_surface(self.last_gray, gray)
                result = resolve_translation(self.last_gray, gray, surface, cfg.registration)
                status = result.status
                rect = self.last_placement.rect.shift(result.displacement.dx,
                                                      result.displacement.dy)
            except NoOverlap:
                status = STATUS_DEGRADED
                rect = self.last_placement.rect
        t_register = time.perf_counter() - t0

        if self.canvas is None:
            canvas = MosaicCanvas(channel_count(frame), cfg.max_canvas_dims)
            lesion_canvas = MosaicCanvas(1, cfg.max_canvas_dims)
        else:
            canvas = self.canvas
            lesion_canvas = self.lesion_canvas

        t0 = time.perf_counter()
        if status == STATUS_OK:
            if canvas.would_exceed(rect) or lesion_canvas.would_exceed(rect):
                raise CanvasLimitExceeded(f"placement {rect} exceeds canvas cap")
            # the ring around the placement; reading before the frame is
            # placed is equivalent because extension ignores the window center
            ctx_pixels, ctx_valid = canvas.window(rect.inflate(cfg.edge_width))
        else:
            ctx_pixels, ctx_valid = empty_context(frame, cfg.edge_width)
        t_extend = time.perf_counter() - t0

        t0 = time.perf_counter()
        mask = segment_extended(self.backend, frame, ctx_pixels, ctx_valid,
                                cfg.edge_width, cfg.strategy, frame_rect=rect)
        t_segment = time.perf_counter() - t0

        t0 = time.perf_counter()
        overlay = render_overlay(frame, mask, cfg.overlay_color)
        placement = Placement(rect, index)
        if status == STATUS_OK:
            canvas.write_region(rect, frame)
            lesion_canvas.write_region(rect, mask)
            self.canvas = canvas
            self.lesion_canvas = lesion_canvas
            self.last_frame = frame
            self.last_gray = gray
            self.last_placement = placement
        if self.canvas is not None:
            mosaic_pixels, _, view_rect = self.canvas.export()
        else:
            mosaic_pixels, view_rect = frame, rect
        mosaic_view = _downscale_view(mosaic_pixels, cfg.snapshot_max_side)
        lesion_view = _downscale_view(
            _lesion_view(self.lesion_canvas, cfg.overlay_color) if self.lesion_canvas
            else np.zeros((h, w, 3), np.uint8),
            cfg.snapshot_max_side)
        t_compose = time.perf_counter() - t0

        self.frame_count += 1
        timings = {
            "register": round(t_register * 1000.0, 3),
            "extend": round(t_extend * 1000.0, 3),
            "segment": round(t_segment * 1000.0, 3),
            "compose": round(t_compose * 1000.0, 3),
        }
        # frames are never dropped (the registration chain needs every one);
        # a lagging step only earns a warning
        total_ms = sum(timings.values())
        budget_ms = 1000.0 / cfg.fps
        if total_ms > 2.0 * budget_ms:
            log.warning("session %s frame %d took %.0f ms, over twice the %.0f ms budget",
                        self.id, index, total_ms, budget_ms)
        self.timing_log.append({"index": index, "status": status, **timings})
        return PipelineOutputs(overlay, rect, mosaic_view, lesion_view, mask,
                               timings, status, index, view_rect)

    def exports(self):
        """Full-resolution mosaic and lesion-map snapshots with validity."""
        canvas = self.canvas or MosaicCanvas(1)
        lesion = self.lesion_canvas or MosaicCanvas(1)
        mosaic_pixels, mosaic_valid, _ = canvas.export()
        lesion_pixels, lesion_valid, _ = lesion.export()
        return (mosaic_pixels, mosaic_valid), (lesion_pixels, lesion_valid)


# ---------------------------------------------------------------------------
# experiment harnesses
# ---------------------------------------------------------------------------

def _estimate_pair(prev: np.ndarray, cur: np.ndarray, algo: str,
                   reg_cfg: RegistrationConfig, feat_cfg: FeatureConfig,
                   affine_cfg: AffineConfig) -> Displacement:
    w, h = dims(prev)
    if algo == ALGO_FOURIER:
        gray_prev = to_luminance(prev)
        gray_cur = to_luminance(cur)
        surface = cross_power_surface(gray_prev, gray_cur)
        return resolve_translation(gray_prev, gray_cur, surface, reg_cfg).displacement
    if algo == ALGO_AFFINE:
        return displacement_from_matrix(affine_register(prev, cur, affine_cfg).matrix, w, h)
    if algo == ALGO_FEATURES:
        kps_prev = detect_and_describe(to_luminance(prev), feat_cfg)
        kps_cur = detect_and_describe(to_luminance(cur), feat_cfg)
        hom, _ = match_and_estimate(kps_prev, kps_cur, feat_cfg)
        return displacement_from_matrix(hom, w, h)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_mosaic_experiment(
    frames: list[FrameEvent],
    stride: int = 1,
    algo: str = ALGO_FOURIER,
    reg_cfg: RegistrationConfig | None = None,
    feat_cfg: FeatureConfig | None = None,
    affine_cfg: AffineConfig | None = None,
    iou_error_threshold: float = 0.9,
) -> dict:
    """Pairwise mosaicking benchmark against known true placements.

    Every consecutive (strided) pair is registered independently; the second
    frame's predicted placement is the first frame's true placement shifted by
    the estimated displacement. A pair is an error when its placement IoU
    drops below the threshold or the algorithm fails outright; outright
    failures are also tallied separately.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    reg_cfg = reg_cfg or RegistrationConfig()
    feat_cfg = feat_cfg or FeatureConfig()
    affine_cfg = affine_cfg or AffineConfig()
    strided = frames[::stride]
    ious: list[float | None] = []
    error_count = 0
    na_count = 0
    elapsed = 0.0
    for prev_ev, cur_ev in zip(strided, strided[1:]):
        t0 = time.perf_counter()
        try:
            d = _estimate_pair(prev_ev.pixels, cur_ev.pixels, algo,
                               reg_cfg, feat_cfg, affine_cfg)
        except ScopeCadError:
            elapsed += time.perf_counter() - t0
            na_count += 1
            error_count += 1
            ious.append(None)
            continue
        elapsed += time.perf_counter() - t0
        predicted = Rect(
            prev_ev.true_placement.x + d.dx, prev_ev.true_placement.y + d.dy,
            cur_ev.true_placement.w, cur_ev.true_placement.h)
        iou = placement_iou(predicted, cur_ev.true_placement)
        ious.append(iou)
        if iou < iou_error_threshold:
            error_count += 1
    pairs = len(strided) - 1
    return {
        "algo": algo,
        "stride": stride,
        "pairs": pairs,
        "error_count": error_count,
        "na_count": na_count,
        "mean_ms_per_frame": elapsed / pairs * 1000.0,
        "ious": ious,
    }


def _segment_resized(backend, image: np.ndarray) -> np.ndarray:
    in_w, in_h = backend.input_size
    w, h = dims(image)
    if (in_w, in_h) != (0, 0) and (w, h) != (in_w, in_h):
        mask = segment(backend, resample(image, in_w, in_h))
        return resize_mask_nearest(mask, w, h)
    return segment(backend, image)


def _sweep_tile(backend, tile, gt_tile, width: int, strategy: str):
    """Per-tile (pred, gt) masks for one sweep cell, scored later."""
    th, tw = tile.shape[:2]
    if strategy == "unchanged" or width == 0:
        pred = _segment_resized(backend, tile)
        if width == 0:
            return pred, gt_tile
        return (pred[width:th - width, width:tw - width],
                gt_tile[width:th - width, width:tw - width])
    gt_mid = gt_tile[width:th - width, width:tw - width]
    if strategy == "deleted":
        inner = tile[width:th - width, width:tw - width]
        pred_full = _segment_resized(backend, resample(inner, tw, th))
        gt_full = resize_mask_nearest(gt_mid, tw, th)
        return pred_full, gt_full
    if strategy in ("zero", "mirror"):
        middle = tile[width:th - width, width:tw - width]
        mask = segment_extended(backend, middle, *empty_context(middle, width),
                                width, strategy)
        return mask, gt_mid
    raise ValueError(f"unknown sweep strategy {strategy!r}")


def run_edge_sweep(
    slide: VirtualSlide,
    backend,
    widths: list[int],
    strategies: tuple[str, ...] = SWEEP_STRATEGIES,
    tile_w: int = 640,
    tile_h: int = 480,
    tau: float = 0.5,
) -> list[dict]:
    """Edge-extension sweep over a fixed tile grid of the slide.

    Scores per (width, strategy) are pixel- and lesion-level metrics with
    tp/fp/fn summed across tiles before forming the ratios.
    """
    if slide.gt_mask is None:
        raise MissingGroundTruth("edge sweep requires a slide ground-truth mask")
    sw, sh = dims(slide.image)
    tiles = []
    for y in range(0, sh - tile_h + 1, tile_h):
        for x in range(0, sw - tile_w + 1, tile_w):
            tiles.append((slide.image[y:y + tile_h, x:x + tile_w],
                          (slide.gt_mask[y:y + tile_h, x:x + tile_w]
                           == 1).astype(np.uint8)))
    if not tiles:
        raise ValueError("slide smaller than one tile")

    rows = []
    for width in widths:
        if 2 * width >= min(tile_w, tile_h):
            raise ValueError(f"width {width} too large for {tile_w}x{tile_h} tiles")
        for strategy in strategies:
            pix = np.zeros(3, dtype=np.int64)  # tp, fp, fn
            les = np.zeros(3, dtype=np.int64)
            for tile, gt_tile in tiles:
                pred, gt_cmp = _sweep_tile(backend, tile, gt_tile, width, strategy)
                p = pixel_metrics(pred, gt_cmp)
                l = lesion_metrics(pred, gt_cmp, tau)
                pix += (p.tp, p.fp, p.fn)
                les += (l.tp, l.fp, l.fn)
            pix_iou, pix_rec, pix_pre = _ratios(*pix.tolist())
            les_iou, les_rec, les_pre = _ratios(*les.tolist())
            rows.append({
                "width": width,
                "strategy": strategy,
                "pixel_iou": pix_iou,
                "pixel_recall": pix_rec,
                "pixel_precision": pix_pre,
                "lesion_iou": les_iou,
                "lesion_recall": les_rec,
                "lesion_precision": les_pre,
            })
    return rows
