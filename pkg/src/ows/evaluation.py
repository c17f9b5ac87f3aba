"""Per-pixel confusion metrics and per-object matching metrics.

Pixel metrics follow the usual confusion-count definitions (overall accuracy,
precision, recall, F-score, IoU); patch sets are micro-averaged by pooling
counts before computing ratios. Object matching pairs predicted and reference
instances by pixel-set IoU with a strict threshold: at 0.5 and above the
matching is automatically one-to-one because two distinct instances cannot
both overlap the same reference by more than half of the union.

Degenerate 0/0 ratios: a pixel metric is 1 when both prediction and reference
foregrounds are empty (nothing to find, nothing found) and 0 otherwise;
object metrics report 1 on empty counts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import geotiff
from .errors import DimMismatchError, EmptyInputError
from .instances import LabeledMask
from .raster import BinaryMask


@dataclass(frozen=True)
class PixelConfusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "PixelConfusion") -> "PixelConfusion":
        return PixelConfusion(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class PixelMetrics:
    oa: float
    precision: float
    recall: float
    fscore: float
    iou: float


@dataclass(frozen=True)
class ObjectCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class ObjectMetrics:
    overall_quality: float
    correctness: float
    completeness: float


@dataclass(frozen=True)
class EvalReport:
    pixel_confusion: PixelConfusion | None = None
    pixel: PixelMetrics | None = None
    object_counts: ObjectCounts | None = None
    object: ObjectMetrics | None = None
    matches: tuple[tuple[int, int, float], ...] = ()
    config: dict = field(default_factory=dict)


def pixel_confusion(pred: BinaryMask, gt: BinaryMask, valid: np.ndarray | None = None) -> PixelConfusion:
    """Exact pixel counts; cells where `valid` is False are excluded entirely.

    BinaryMask carries no nodata itself, so validity comes from the caller
    (typically the source stack's coverage).
    """
    if pred.bits.shape != gt.bits.shape:
        raise DimMismatchError(f"pred {pred.bits.shape} vs gt {gt.bits.shape}")
    p, g = pred.bits, gt.bits
    if valid is not None:
        if valid.shape != p.shape:
            raise DimMismatchError(f"valid {valid.shape} vs masks {p.shape}")
        p, g = p[valid], g[valid]
    return PixelConfusion(
        tp=int(np.count_nonzero(p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
    )


def _ratio(num: int, den: int, both_empty: bool) -> float:
    if den == 0:
        return 1.0 if both_empty else 0.0
    return num / den


def pixel_metrics(c: PixelConfusion) -> PixelMetrics:
    both_empty = (c.tp + c.fp) == 0 and (c.tp + c.fn) == 0
    precision = _ratio(c.tp, c.tp + c.fp, both_empty)
    recall = _ratio(c.tp, c.tp + c.fn, both_empty)
    if precision + recall > 0:
        fscore = 2 * precision * recall / (precision + recall)
    else:
        fscore = 1.0 if both_empty else 0.0
    iou = _ratio(c.tp, c.tp + c.fp + c.fn, both_empty)
    oa = (c.tp + c.tn) / c.total if c.total else 1.0
    return PixelMetrics(oa=oa, precision=precision, recall=recall, fscore=fscore, iou=iou)


def match_objects(
    pred: LabeledMask, gt: LabeledMask, iou_threshold: float = 0.5
) -> tuple[ObjectCounts, list[tuple[int, int, float]]]:
    """Pair instances whose pixel-set IoU strictly exceeds the threshold.

    Returns counts plus the match list (pred_id, gt_id, iou). Pairing is
    greedy by descending IoU, which is only a tie-break device: thresholds
    of 0.5 and above force the matching to be one-to-one anyway.
    """
    if pred.labels.shape != gt.labels.shape:
        raise DimMismatchError(f"pred {pred.labels.shape} vs gt {gt.labels.shape}")

    pred_areas = np.bincount(pred.labels.ravel(), minlength=pred.n_instances + 1)
    gt_areas = np.bincount(gt.labels.ravel(), minlength=gt.n_instances + 1)

    overlap = (pred.labels > 0) & (gt.labels > 0)
    pair_keys = pred.labels[overlap].astype(np.int64) * (gt.n_instances + 1) + gt.labels[overlap]
    keys, counts = np.unique(pair_keys, return_counts=True)

    candidates: list[tuple[float, int, int]] = []
    for key, inter in zip(keys, counts):
        pred_id = int(key // (gt.n_instances + 1))
        gt_id = int(key % (gt.n_instances + 1))
        union = int(pred_areas[pred_id]) + int(gt_areas[gt_id]) - int(inter)
        iou = float(inter) / union
        if iou > iou_threshold:
            candidates.append((iou, pred_id, gt_id))

    candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
    matched_pred: set[int] = set()
    matched_gt: set[int] = set()
    matches: list[tuple[int, int, float]] = []
    for iou, pred_id, gt_id in candidates:
        if pred_id in matched_pred or gt_id in matched_gt:
            continue
        matched_pred.add(pred_id)
        matched_gt.add(gt_id)
        matches.append((pred_id, gt_id, iou))

    tp = len(matches)
    counts_out = ObjectCounts(tp=tp, fp=pred.n_instances - tp, fn=gt.n_instances - tp)
    return counts_out, matches


def object_metrics(c: ObjectCounts) -> ObjectMetrics:
    def ratio(num: int, den: int) -> float:
        return num / den if den else 1.0

    return ObjectMetrics(
        overall_quality=ratio(c.tp, c.tp + c.fp + c.fn),
        correctness=ratio(c.tp, c.tp + c.fp),
        completeness=ratio(c.tp, c.tp + c.fn),
    )


def pooled_confusion(preds: list[BinaryMask], gts: list[BinaryMask]) -> PixelConfusion:
    if not preds or not gts:
        raise EmptyInputError("need at least one mask pair")
    if len(preds) != len(gts):
        raise DimMismatchError(f"{len(preds)} predictions vs {len(gts)} references")
    pooled = PixelConfusion()
    for p, g in zip(preds, gts):
        pooled = pooled + pixel_confusion(p, g)
    return pooled


def evaluate_patchset(preds: list[BinaryMask], gts: list[BinaryMask]) -> PixelMetrics:
    """Micro-average: pool confusion over all patches, then compute once."""
    return pixel_metrics(pooled_confusion(preds, gts))


def _round6(x: float) -> float:
    return round(float(x), 6)


def report_to_dict(report: EvalReport) -> dict:
    doc: dict = {"config": report.config}
    if report.pixel_confusion is not None and report.pixel is not None:
        c, m = report.pixel_confusion, report.pixel
        doc["pixel"] = {
            "tp": c.tp,
            "tn": c.tn,
            "fp": c.fp,
            "fn": c.fn,
            "oa": _round6(m.oa),
            "precision": _round6(m.precision),
            "recall": _round6(m.recall),
            "fscore": _round6(m.fscore),
            "iou": _round6(m.iou),
        }
    if report.object_counts is not None and report.object is not None:
        c, m = report.object_counts, report.object
        doc["object"] = {
            "tp": c.tp,
            "fp": c.fp,
            "fn": c.fn,
            "overall_quality": _round6(m.overall_quality),
            "correctness": _round6(m.correctness),
            "completeness": _round6(m.completeness),
            "matches": [
                {"pred_id": p, "gt_id": g, "iou": _round6(i)} for p, g, i in report.matches
            ],
        }
    return doc


def write_report(path: str | os.PathLike, report: EvalReport) -> None:
    geotiff.write_json_atomic(path, json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
