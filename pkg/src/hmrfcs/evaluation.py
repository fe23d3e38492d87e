"""Dice-coefficient scoring of a segmentation against ground truth.

Class indices coming out of the optimizer are arbitrary, so predictions
are first relabeled canonically (ascending class mean: 1 = darkest).
The reported mean can exclude a background class to match the usual
three-tissue bookkeeping of brain-MRI benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import LabelMap

__all__ = ["DiceReport", "dice", "align_labels", "evaluate"]


@dataclass(frozen=True)
class DiceReport:
    """Per-class Dice values of the scored classes and their mean."""

    per_class: tuple[float, ...]
    mean: float
    class_names: tuple[str, ...] | None = None


def _check_same_grid(pred: LabelMap, truth: LabelMap) -> None:
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ValueError(
            f"dimension mismatch: {pred.width}x{pred.height} vs "
            f"{truth.width}x{truth.height}"
        )


def dice(
    pred: LabelMap,
    truth: LabelMap,
    class_index: int,
    jaccard_denominator: bool = False,
) -> float:
    """Overlap 2|A^B| / (|A| + |B|) for one class; 1.0 when both empty.

    With jaccard_denominator=True the denominator is |A u B| instead
    (a compatibility mode; note 2|A^B|/|AuB| can exceed 1).
    """
    _check_same_grid(pred, truth)
    if class_index < 1 or class_index > max(pred.num_classes, truth.num_classes):
        raise ValueError(f"class index {class_index} out of range")
    a = pred.labels == class_index
    b = truth.labels == class_index
    inter = int(np.count_nonzero(a & b))
    size_a = int(np.count_nonzero(a))
    size_b = int(np.count_nonzero(b))
    if size_a == 0 and size_b == 0:
        return 1.0
    if jaccard_denominator:
        return 2.0 * inter / (size_a + size_b - inter)
    return 2.0 * inter / (size_a + size_b)


def align_labels(pred: LabelMap, mu_star) -> LabelMap:
    """Relabel so classes are ranked by ascending mean intensity.

    Class 1 becomes the darkest mean of mu_star, class K the brightest.
    A pure label bijection: region shapes and sizes are untouched.
    """
    mu = np.asarray(mu_star, dtype=np.float64)
    if mu.ndim != 1 or mu.size != pred.num_classes:
        raise ValueError("mu_star length must equal the number of classes")
    # rank[j] = 0-based position of class j+1 in ascending-mean order
    rank = np.argsort(np.argsort(mu, kind="stable"), kind="stable")
    new_labels = rank[pred.labels - 1] + 1
    return LabelMap(pred.width, pred.height, new_labels, pred.num_classes)


def evaluate(
    pred: LabelMap,
    truth: LabelMap,
    exclude_background: bool = False,
    class_names=None,
    jaccard_denominator: bool = False,
) -> DiceReport:
    """Per-class Dice plus arithmetic mean over the scored classes.

    With exclude_background=True class 1 (the darkest after alignment)
    is dropped from the report, mirroring benchmarks that average tissue
    classes only. class_names, when given, must name the scored classes.
    """
    _check_same_grid(pred, truth)
    if pred.num_classes != truth.num_classes:
        raise ValueError(
            f"class count mismatch: {pred.num_classes} vs {truth.num_classes}"
        )
    first = 2 if exclude_background else 1
    scored = list(range(first, pred.num_classes + 1))
    if not scored:
        raise ValueError("no classes left to score")
    values = tuple(
        dice(pred, truth, c, jaccard_denominator=jaccard_denominator) for c in scored
    )
    if class_names is not None:
        class_names = tuple(str(n) for n in class_names)
        if len(class_names) != len(values):
            raise ValueError("class_names length must match scored classes")
    return DiceReport(
        per_class=values,
        mean=float(np.mean(values)),
        class_names=class_names,
    )
