"""Binary segmentation metrics: overall accuracy, per-class IoU, mean IoU, F1.

Cropland is the positive class. Metrics whose denominator is zero are
reported as None ("undefined") and excluded from macro aggregation; mean
IoU averages whichever per-class IoUs are defined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class MetricsReport:
    oa: Optional[float]
    miou: Optional[float]
    f1: Optional[float]
    iou_crop: Optional[float]
    iou_noncrop: Optional[float]
    cm: ConfusionMatrix
    tile_id: str = ""

    def as_dict(self) -> dict:
        return {
            "tile_id": self.tile_id,
            "tp": self.cm.tp, "fp": self.cm.fp, "fn": self.cm.fn, "tn": self.cm.tn,
            "oa": self.oa, "miou": self.miou, "f1": self.f1,
            "iou_crop": self.iou_crop, "iou_noncrop": self.iou_noncrop,
        }


def confusion(pred: np.ndarray, gt: np.ndarray,
              ignore: Optional[np.ndarray] = None) -> ConfusionMatrix:
    """Tally the binary confusion matrix over non-ignored pixels."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    keep = np.ones(pred.shape, dtype=bool)
    if ignore is not None:
        ignore = np.asarray(ignore)
        if ignore.shape != pred.shape:
            raise DimensionMismatch(f"ignore {ignore.shape} vs pred {pred.shape}")
        keep = ~ignore.astype(bool)
    p = pred.astype(bool)[keep]
    g = gt.astype(bool)[keep]
    return ConfusionMatrix(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
    )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def compute_metrics(cm: ConfusionMatrix, tile_id: str = "") -> MetricsReport:
    """Derive OA, per-class IoU, mean IoU and cropland F1 from a confusion matrix."""
    oa = _ratio(cm.tp + cm.tn, cm.total)
    iou_crop = _ratio(cm.tp, cm.tp + cm.fp + cm.fn)
    iou_noncrop = _ratio(cm.tn, cm.tn + cm.fn + cm.fp)
    defined = [v for v in (iou_crop, iou_noncrop) if v is not None]
    miou = sum(defined) / len(defined) if defined else None
    f1 = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
    return MetricsReport(oa=oa, miou=miou, f1=f1, iou_crop=iou_crop,
                         iou_noncrop=iou_noncrop, cm=cm, tile_id=tile_id)


@dataclass(frozen=True)
class AggregateReport:
    """Micro (summed-confusion) headline metrics plus informational macro means."""

    micro: MetricsReport
    macro: dict
    n_tiles: int

    def as_dict(self) -> dict:
        micro = self.micro.as_dict()
        micro.pop("tile_id")
        return {"n_tiles": self.n_tiles, "micro": micro, "macro": dict(self.macro)}


def aggregate(reports: Sequence[MetricsReport]) -> AggregateReport:
    """Combine per-tile reports: micro by summing confusion matrices, macro
    by averaging each metric over the tiles where it is defined."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to aggregate")
    total = ConfusionMatrix()
    for r in reports:
        total = total + r.cm
    micro = compute_metrics(total, tile_id="aggregate")
    macro = {}
    for name in ("oa", "miou", "f1", "iou_crop", "iou_noncrop"):
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        macro[name] = sum(values) / len(values) if values else None
    return AggregateReport(micro=micro, macro=macro, n_tiles=len(reports))
