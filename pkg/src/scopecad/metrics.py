"""Pixel- and lesion-level IoU / recall / precision.

Lesion-level scoring treats each connected component as one lesion: predicted
and ground-truth components are matched one-to-one, greedily by descending
pair IoU, and pairs at or above the match threshold count as true positives.

Empty-denominator conventions (deliberate, they shape sweep curves): with
both masks empty every metric is 1; an empty prediction against a non-empty
truth scores precision 1; an empty truth against a non-empty prediction
scores recall 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch
from .raster import Rect

CSV_FIELDS = ("level", "iou", "recall", "precision", "tp", "fp", "fn")


@dataclass
class MetricsReport:
    level: str
    iou: float
    recall: float
    precision: float
    tp: int
    fp: int
    fn: int

    def to_json(self) -> str:
        return json.dumps({f: getattr(self, f) for f in CSV_FIELDS})

    def to_csv_row(self) -> str:
        return ",".join(str(getattr(self, f)) for f in CSV_FIELDS)


@dataclass
class ComponentSet:
    labels: np.ndarray  # int32, 0 background, ids dense 1..count
    count: int
    areas: np.ndarray  # areas[k] for component k, index 0 unused
    bboxes: list[Rect]  # bboxes[k - 1] for component k


@dataclass
class LesionMatchReport:
    matched: list[tuple[int, int, float]]  # (pred id, gt id, pair IoU)
    unmatched_pred: list[int]
    unmatched_gt: list[int]


def _ratios(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    return iou, recall, precision


def pixel_metrics(pred: np.ndarray, gt: np.ndarray) -> MetricsReport:
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"mask dims differ: {pred.shape} vs {gt.shape}")
    p = pred > 0
    g = gt > 0
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    iou, recall, precision = _ratios(tp, fp, fn)
    return MetricsReport("pixel", iou, recall, precision, tp, fp, fn)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> ComponentSet:
    """Label foreground (nonzero) pixels; ids follow first-pixel row-major order."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    fg = (mask > 0).astype(np.uint8)
    labels = _kernels.label_components(fg, connectivity)
    count = int(labels.max(initial=0))
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    bboxes = []
    for k in range(1, count + 1):
        ys, xs = np.nonzero(labels == k)
        x0, y0 = int(xs.min()), int(ys.min())
        bboxes.append(Rect(x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1))
    return ComponentSet(labels, count, areas, bboxes)


def match_lesions(pred: ComponentSet, gt: ComponentSet, tau: float = 0.5) -> LesionMatchReport:
    """Greedy one-to-one matching of components by descending pair IoU.

    Only intersecting pairs are considered; ties break on lower pred id,
    then lower gt id. Pairs below ``tau`` never match.
    """
    if pred.labels.shape != gt.labels.shape:
        raise DimensionMismatch(
            f"component maps differ: {pred.labels.shape} vs {gt.labels.shape}")
    both = (pred.labels > 0) & (gt.labels > 0)
    pairs = []
    if both.any():
        joint = pred.labels[both].astype(np.int64) * (gt.count + 1) + gt.labels[both]
        counts = np.bincount(joint)
        for j in np.nonzero(counts)[0]:
            pid, gid = divmod(int(j), gt.count + 1)
            inter = int(counts[j])
            union = int(pred.areas[pid]) + int(gt.areas[gid]) - inter
            iou = inter / union
            if iou >= tau:
                pairs.append((iou, pid, gid))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    matched = []
    used_pred = set()
    used_gt = set()
    for iou, pid, gid in pairs:
        if pid in used_pred or gid in used_gt:
            continue
        used_pred.add(pid)
        used_gt.add(gid)
        matched.append((pid, gid, iou))
    unmatched_pred = [k for k in range(1, pred.count + 1) if k not in used_pred]
    unmatched_gt = [k for k in range(1, gt.count + 1) if k not in used_gt]
    return LesionMatchReport(matched, unmatched_pred, unmatched_gt)


def lesion_metrics(pred: np.ndarray, gt: np.ndarray, tau: float = 0.5) -> MetricsReport:
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"mask dims differ: {pred.shape} vs {gt.shape}")
    report = match_lesions(connected_components(pred, 8), connected_components(gt, 8), tau)
    tp = len(report.matched)
    fp = len(report.unmatched_pred)
    fn = len(report.unmatched_gt)
    iou, recall, precision = _ratios(tp, fp, fn)
    return MetricsReport("lesion", iou, recall, precision, tp, fp, fn)
