"""Evaluation metrics for imbalanced ordinal classification.

Everything here operates on confusion matrices (rows = true class, columns
= predicted class) or raw label/logit arrays, and is computed in double
precision regardless of the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "confusion",
    "accuracy",
    "per_class_f1",
    "macro_f1",
    "cohen_kappa",
    "margin_confidence",
    "report_from_confusion",
]

ConfusionMatrix = np.ndarray  # (k, k) non-negative integer counts


def confusion(true: np.ndarray, pred: np.ndarray, k: int) -> ConfusionMatrix:
    """Tally a k x k confusion matrix; counts[t][p] = |{i : true_i=t, pred_i=p}|."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise ValueError(f"length mismatch: {true.shape} vs {pred.shape}")
    if true.size and (true.min() < 0 or true.max() >= k):
        raise ValueError("true labels outside [0, k)")
    if pred.size and (pred.min() < 0 or pred.max() >= k):
        raise ValueError("predicted labels outside [0, k)")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return counts


def _check_cm(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix has negative counts")
    if cm.sum() == 0:
        raise ValueError("confusion matrix is empty (total count 0)")
    return cm.astype(np.float64)


def accuracy(cm: ConfusionMatrix) -> float:
    """Trace over total."""
    m = _check_cm(cm)
    return float(np.trace(m) / m.sum())


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class F1. A class with zero precision+recall denominator gets F1=0."""
    m = _check_cm(cm)
    tp = np.diag(m)
    support = m.sum(axis=1)  # true count per class
    predicted = m.sum(axis=0)
    denom = support + predicted  # 2*tp + fn + fp
    f1 = np.zeros(m.shape[0], dtype=np.float64)
    nonzero = denom > 0
    f1[nonzero] = 2.0 * tp[nonzero] / denom[nonzero]
    return f1


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1 over all k classes of the matrix."""
    return float(per_class_f1(cm).mean())


def _weight_matrix(k: int, weighting: str) -> np.ndarray:
    idx = np.arange(k, dtype=np.float64)
    diff = np.abs(idx[:, None] - idx[None, :])
    if weighting == "none":
        return (diff > 0).astype(np.float64)
    if k < 2:
        raise ValueError("weighted kappa needs k >= 2")
    if weighting == "linear":
        return diff / (k - 1)
    if weighting == "quadratic":
        return (diff / (k - 1)) ** 2
    raise ValueError(f"unknown weighting {weighting!r}")


def cohen_kappa(cm: ConfusionMatrix, weighting: str = "none") -> float:
    """Chance-corrected agreement, kappa = 1 - sum(w*o) / sum(w*e).

    o is the observed proportion matrix, e the outer product of the
    marginals, and w the disagreement weights: 0/1 for ``weighting="none"``,
    |i-j|/(k-1) for ``"linear"`` and ((i-j)/(k-1))^2 for ``"quadratic"``.

    Raises ValueError when the chance disagreement sum(w*e) is zero (all
    mass on a single agreeing cell), where kappa is undefined.
    """
    m = _check_cm(cm)
    total = m.sum()
    w = _weight_matrix(m.shape[0], weighting)
    observed = m / total
    expected = np.outer(m.sum(axis=1), m.sum(axis=0)) / (total * total)
    chance = float((w * expected).sum())
    if chance == 0.0:
        raise ValueError("kappa undefined: zero chance disagreement")
    return float(1.0 - (w * observed).sum() / chance)


def margin_confidence(logits: np.ndarray) -> float:
    """Margin between the two largest scores as a percentage.

    100 * (top1 - top2) / (|top1| + |top2|); defined as 0 when both are 0.
    Always lies in [0, 100] for finite scores since top1 >= top2.
    """
    scores = np.asarray(logits, dtype=np.float64).ravel()
    if scores.size < 2:
        raise ValueError("need at least 2 class scores")
    if not np.isfinite(scores).all():
        raise ValueError("non-finite score")
    top2 = np.partition(scores, -2)[-2:]
    y2, y1 = float(top2[0]), float(top2[1])
    denom = abs(y1) + abs(y2)
    if denom == 0.0:
        return 0.0
    # ratio first: (y1-y2) <= denom holds in IEEE arithmetic, so the ratio
    # never exceeds 1 and the percentage never exceeds 100
    return 100.0 * ((y1 - y2) / denom)


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_f1: float
    per_class_f1: tuple[float, ...]
    kappa_unweighted: float | None
    kappa_linear: float | None
    kappa_quadratic: float | None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": list(self.per_class_f1),
            "kappa_unweighted": self.kappa_unweighted,
            "kappa_linear": self.kappa_linear,
            "kappa_quadratic": self.kappa_quadratic,
        }


def report_from_confusion(cm: ConfusionMatrix) -> MetricReport:
    """Bundle all confusion-derived metrics; kappas are None when undefined."""
    kappas = {}
    for weighting in ("none", "linear", "quadratic"):
        try:
            kappas[weighting] = cohen_kappa(cm, weighting)
        except ValueError:
            kappas[weighting] = None
    return MetricReport(
        accuracy=accuracy(cm),
        macro_f1=macro_f1(cm),
        per_class_f1=tuple(per_class_f1(cm)),
        kappa_unweighted=kappas["none"],
        kappa_linear=kappas["linear"],
        kappa_quadratic=kappas["quadratic"],
    )
