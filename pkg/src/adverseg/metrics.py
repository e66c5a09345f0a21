"""Evaluation metrics, all reported as percentages.

Segmentation: Dice and pixel accuracy (two empty masks count as Dice 100).
Detection: true IoU between axis-aligned squares, plus the clinical binary
report where hemangioma (cls 1) is the positive class, HCC (cls 2) the
negative class, and background slices are tallied separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import BoxTuple
from .errors import DimensionError

EVAL_CSV_HEADER = ("sample_id", "dsc", "p_acc", "iou", "gt_cls", "pred_cls")
SUMMARY_CSV_HEADER = ("dsc", "p_acc", "iou", "tpr", "tnr", "acc")


def _check_binary_pair(pred: np.ndarray, gt: np.ndarray):
    if pred.shape != gt.shape:
        raise DimensionError(f"mask shapes disagree: {pred.shape} vs {gt.shape}")


def dsc(pred: np.ndarray, gt: np.ndarray) -> float:
    _check_binary_pair(pred, gt)
    p = pred > 0.5
    g = gt > 0.5
    denom = p.sum() + g.sum()
    if denom == 0:
        return 100.0
    return float(200.0 * (p & g).sum() / denom)


def pixel_accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    _check_binary_pair(pred, gt)
    return float(100.0 * ((pred > 0.5) == (gt > 0.5)).mean())


def mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    _check_binary_pair(pred, gt)
    p = pred > 0.5
    g = gt > 0.5
    union = (p | g).sum()
    if union == 0:
        return 100.0
    return float(100.0 * (p & g).sum() / union)


def box_iou(a: BoxTuple, b: BoxTuple) -> float:
    """Intersection over union of two axis-aligned squares, continuous geometry."""
    ax0, ax1 = a.cx - a.side / 2, a.cx + a.side / 2
    ay0, ay1 = a.cy - a.side / 2, a.cy + a.side / 2
    bx0, bx1 = b.cx - b.side / 2, b.cx + b.side / 2
    by0, by1 = b.cy - b.side / 2, b.cy + b.side / 2
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a.side ** 2 + b.side ** 2 - inter
    if union <= 0:
        return 0.0
    return float(100.0 * inter / union)


@dataclass
class ClassificationReport:
    tp: int
    fn: int
    tn: int
    fp: int
    n_background: int = 0
    background_correct: int = 0

    @property
    def tpr(self) -> float:
        d = self.tp + self.fn
        return 100.0 * self.tp / d if d else 0.0

    @property
    def tnr(self) -> float:
        d = self.fp + self.tn
        return 100.0 * self.tn / d if d else 0.0

    @property
    def acc(self) -> float:
        d = self.tp + self.fn + self.tn + self.fp
        return 100.0 * (self.tp + self.tn) / d if d else 0.0


def classification_report(pairs: list[tuple[int, int]]) -> ClassificationReport:
    """pairs of (gt_cls, pred_cls); hemangioma=positive, HCC=negative.

    Background ground truth is excluded from the binary counts and reported
    separately. A prediction of 1 counts as a positive call, anything else
    as a negative call.
    """
    tp = fn = tn = fp = bg = bg_ok = 0
    for gt, pred in pairs:
        if gt == 0:
            bg += 1
            bg_ok += int(pred == 0)
        elif gt == 1:
            tp += int(pred == 1)
            fn += int(pred != 1)
        elif gt == 2:
            fp += int(pred == 1)
            tn += int(pred != 1)
        else:
            raise DimensionError(f"ground-truth class {gt} out of range")
    return ClassificationReport(tp=tp, fn=fn, tn=tn, fp=fp,
                                n_background=bg, background_correct=bg_ok)


@dataclass
class PerSampleEval:
    sample_id: str
    dsc: float
    p_acc: float
    iou: float | None  # None when the sample has no ground-truth box
    gt_cls: int
    pred_cls: int


@dataclass
class EvalReport:
    dsc: float
    p_acc: float
    iou: float
    tpr: float
    tnr: float
    acc: float
    per_sample: list[PerSampleEval] = field(default_factory=list)
    report: ClassificationReport | None = None


def aggregate(per_sample: list[PerSampleEval]) -> EvalReport:
    if not per_sample:
        raise DimensionError("nothing to aggregate")
    rep = classification_report([(r.gt_cls, r.pred_cls) for r in per_sample])
    ious = [r.iou for r in per_sample if r.iou is not None]
    return EvalReport(
        dsc=float(np.mean([r.dsc for r in per_sample])),
        p_acc=float(np.mean([r.p_acc for r in per_sample])),
        iou=float(np.mean(ious)) if ious else 0.0,
        tpr=rep.tpr, tnr=rep.tnr, acc=rep.acc,
        per_sample=per_sample, report=rep,
    )


def write_eval_csv(path: str | Path, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(EVAL_CSV_HEADER)
        for r in report.per_sample:
            iou = "" if r.iou is None else f"{r.iou:.4f}"
            w.writerow([r.sample_id, f"{r.dsc:.4f}", f"{r.p_acc:.4f}", iou, r.gt_cls, r.pred_cls])


def write_summary_csv(path: str | Path, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_CSV_HEADER)
        w.writerow([f"{getattr(report, k):.4f}" for k in SUMMARY_CSV_HEADER])
