"""Pseudo-label quality metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimMismatch
from .rle import rle_decode
from .types import VOID, Connectivity, LabelMap, Taxonomy


@dataclass(frozen=True)
class Metrics:
    per_class_iou: tuple  # length K, None for classes absent from GT and prediction
    miou: float
    pixel_accuracy: float
    coverage: float
    connectivity_label_accuracy: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "per_class_iou": [None if v is None else float(v) for v in self.per_class_iou],
            "miou": float(self.miou),
            "pixel_accuracy": float(self.pixel_accuracy),
            "coverage": float(self.coverage),
            "connectivity_label_accuracy": self.connectivity_label_accuracy,
        }


def evaluate(pred: LabelMap, gt: LabelMap, taxonomy: Taxonomy) -> Metrics:
    """Confusion-matrix metrics over non-void ground-truth pixels.

    Void prediction pixels count as wrong for accuracy. Coverage is the
    labeled fraction of the prediction over the whole raster. miou averages
    IoU over classes present in ground truth or prediction.
    """
    if pred.data.shape != gt.data.shape:
        raise DimMismatch("prediction and ground truth dims differ")
    k = taxonomy.k
    valid = gt.data != VOID
    g = gt.data[valid].astype(np.int64)
    p = pred.data[valid].astype(np.int64)
    p = np.where(p == VOID, k, p)  # void prediction becomes an extra column

    cm = np.bincount(g * (k + 1) + p, minlength=k * (k + 1)).reshape(k, k + 1)
    tp = np.diag(cm[:, :k]).astype(np.float64)
    gt_count = cm.sum(axis=1)
    pred_count = cm[:, :k].sum(axis=0)
    union = gt_count + pred_count - tp

    present = (gt_count > 0) | (pred_count > 0)
    per_class = [None] * k
    for c in range(k):
        if present[c]:
            per_class[c] = float(tp[c] / union[c]) if union[c] > 0 else 0.0
    miou = float(np.mean([v for v in per_class if v is not None])) if present.any() else 0.0

    total = int(valid.sum())
    accuracy = float(tp.sum() / total) if total else 0.0
    coverage = float((pred.data != VOID).mean())
    return Metrics(per_class_iou=tuple(per_class), miou=miou,
                   pixel_accuracy=accuracy, coverage=coverage)


def connectivity_label_accuracy(conns: Sequence[Connectivity], gt: LabelMap) -> Optional[float]:
    """Fraction of connectivities labeled with the majority GT class under their mask.

    Connectivities whose mask covers only void ground truth are skipped;
    returns None when nothing can be judged.
    """
    hits = 0
    judged = 0
    for c in conns:
        m = rle_decode(c.mask)
        votes = np.bincount(gt.data[m].astype(np.int64), minlength=256)[:255]
        if votes.sum() == 0:
            continue
        judged += 1
        if int(np.argmax(votes)) == c.label:
            hits += 1
    return hits / judged if judged else None
