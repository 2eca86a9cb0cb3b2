"""Evaluation metrics for emotion classification and valence/arousal regression.

Classification: accuracy, macro F1, Cohen's kappa, Krippendorff's alpha
(nominal, two raters), macro one-vs-rest AUC and area under the
precision-recall curve. Regression: RMSE, Pearson correlation, sign
agreement rate (SAGR) and the concordance correlation coefficient (CCC).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def confusion(true_labels, pred_labels, num_classes: int = 8) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise MetricError(f"label vectors differ in length: {t.shape} vs {p.shape}")
    if t.size and (t.min() < 0 or t.max() >= num_classes or p.min() < 0 or p.max() >= num_classes):
        raise MetricError(f"labels must lie in 0..{num_classes - 1}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricError("empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1; a class with no support and no
    predictions contributes 0."""
    if cm.total == 0:
        raise MetricError("empty confusion matrix")
    tp = np.diag(cm.counts).astype(np.float64)
    pred = cm.col_sums().astype(np.float64)
    truth = cm.row_sums().astype(np.float64)
    f1 = np.zeros(cm.num_classes)
    denom = pred + truth  # = 2tp + fp + fn
    nz = denom > 0
    f1[nz] = 2.0 * tp[nz] / denom[nz]
    return float(f1.mean())


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e)."""
    n = cm.total
    if n == 0:
        raise MetricError("empty confusion matrix")
    p_o = np.trace(cm.counts) / n
    p_e = float((cm.row_sums() / n) @ (cm.col_sums() / n))
    if p_e >= 1.0:
        warnings.warn("degenerate marginals: expected agreement is 1; kappa set to 0", stacklevel=2)
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def krippendorff_alpha(true_labels, pred_labels) -> float:
    """Nominal-data alpha for two raters: 1 - D_o / D_e.

    Built on the coincidence matrix: each item contributes its value pair in
    both orders; observed disagreement is the off-diagonal coincidence mass,
    expected disagreement comes from the marginals.
    """
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise MetricError(f"label vectors differ in length: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise MetricError("no items to compare")
    values = np.unique(np.concatenate([t, p]))
    index = {v: i for i, v in enumerate(values)}
    k = len(values)
    coincidence = np.zeros((k, k), dtype=np.float64)
    for a, b in zip(t, p):
        ia, ib = index[a], index[b]
        coincidence[ia, ib] += 1.0
        coincidence[ib, ia] += 1.0
    n = coincidence.sum()  # 2 * number of items
    marginals = coincidence.sum(axis=1)
    d_o = (coincidence.sum() - np.trace(coincidence)) / n
    d_e = (n * n - (marginals**2).sum()) / (n * (n - 1.0))
    if d_e == 0.0:
        raise MetricError("zero expected disagreement: every rating is identical")
    return float(1.0 - d_o / d_e)


def _binary_roc_auc(pos: np.ndarray, scores: np.ndarray) -> float:
    """Trapezoidal area under the ROC curve, grouping tied scores."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = pos[order]
    distinct = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[cut].astype(np.float64)
    fp = np.cumsum(~y)[cut].astype(np.float64)
    n_pos, n_neg = tp[-1], fp[-1]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return float(np.trapezoid(tpr, fpr))


def _binary_average_precision(pos: np.ndarray, scores: np.ndarray) -> float:
    """Step-interpolated area under the precision-recall curve."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = pos[order]
    distinct = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[cut].astype(np.float64)
    n_pred = cut + 1.0
    recall = tp / tp[-1]
    precision = tp / n_pred
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev) * precision).sum())


def _macro_over_classes(true_labels, score_matrix, binary_fn) -> float:
    t = np.asarray(true_labels, dtype=np.int64)
    scores = np.asarray(score_matrix, dtype=np.float64)
    if scores.ndim != 2 or len(t) != scores.shape[0]:
        raise MetricError(f"scores must be (n_samples, n_classes), got {scores.shape}")
    values = []
    for c in range(scores.shape[1]):
        pos = t == c
        if not pos.any() or pos.all():
            warnings.warn(
                f"class {c} lacks positives or negatives in the truth; skipped", stacklevel=3
            )
            continue
        values.append(binary_fn(pos, scores[:, c]))
    if not values:
        raise MetricError("no class had both positives and negatives")
    return float(np.mean(values))


def auc_macro(true_labels, score_matrix) -> float:
    return _macro_over_classes(true_labels, score_matrix, _binary_roc_auc)


def aucpr_macro(true_labels, score_matrix) -> float:
    return _macro_over_classes(true_labels, score_matrix, _binary_average_precision)


def _check_vectors(pred, truth):
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise MetricError(f"vectors differ in length: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise MetricError("empty vectors")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _check_vectors(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def pearson(pred, truth) -> float:
    p, t = _check_vectors(pred, truth)
    sp = p.std()
    st = t.std()
    if sp == 0.0 or st == 0.0:
        raise MetricError("correlation undefined for zero-variance input")
    return float(np.mean((p - p.mean()) * (t - t.mean())) / (sp * st))


def sagr(pred, truth) -> float:
    """Fraction of predictions whose sign matches the truth; sign(0) is +."""
    p, t = _check_vectors(pred, truth)
    return float(np.mean((p >= 0) == (t >= 0)))


def ccc(pred, truth) -> float:
    """Concordance correlation, population variances:
    2*cov / (var_p + var_t + (mean_p - mean_t)^2)."""
    p, t = _check_vectors(pred, truth)
    vp = p.var()
    vt = t.var()
    if vp == 0.0 or vt == 0.0:
        raise MetricError("concordance undefined for zero-variance input")
    cov = np.mean((p - p.mean()) * (t - t.mean()))
    return float(2.0 * cov / (vp + vt + (p.mean() - t.mean()) ** 2))


@dataclass
class ClassificationReport:
    acc: float
    f1: float
    kappa: float
    alpha: float
    aucpr: float | None
    auc: float | None

    _ROWS = ("ACC", "F1", "KAPPA", "ALPHA", "AUCPR", "AUC")

    def as_dict(self) -> dict:
        return {
            "ACC": self.acc,
            "F1": self.f1,
            "KAPPA": self.kappa,
            "ALPHA": self.alpha,
            "AUCPR": self.aucpr,
            "AUC": self.auc,
        }

    def to_text(self) -> str:
        rows = []
        for name, value in self.as_dict().items():
            rows.append(f"{name:<6} {'n/a' if value is None else f'{value:.3f}'}")
        return "\n".join(rows)

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


@dataclass
class RegressionReport:
    valence: dict
    arousal: dict

    _ROWS = ("RMSE", "CORR", "SAGR", "CCC")

    def as_dict(self) -> dict:
        return {"valence": self.valence, "arousal": self.arousal}

    def to_text(self) -> str:
        lines = [f"{'':6} {'V':>7} {'A':>7}"]
        for name in self._ROWS:
            key = name.lower()
            lines.append(f"{name:<6} {self.valence[key]:>7.3f} {self.arousal[key]:>7.3f}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def evaluate_classification(true_labels, probs) -> ClassificationReport:
    """Score argmax predictions and per-class probabilities against truth."""
    scores = np.asarray(probs, dtype=np.float64)
    preds = scores.argmax(axis=1)
    cm = confusion(true_labels, preds, num_classes=scores.shape[1])
    try:
        auc = auc_macro(true_labels, scores)
        aucpr = aucpr_macro(true_labels, scores)
    except MetricError:
        auc = aucpr = None
    return ClassificationReport(
        acc=accuracy(cm),
        f1=macro_f1(cm),
        kappa=cohen_kappa(cm),
        alpha=krippendorff_alpha(true_labels, preds),
        aucpr=aucpr,
        auc=auc,
    )


def evaluate_regression(pred, truth) -> RegressionReport:
    """Per-dimension scores for (valence, arousal) prediction pairs."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 2 or p.shape[1] != 2:
        raise MetricError(f"expected matching (n, 2) arrays, got {p.shape} and {t.shape}")
    dims = {}
    for i, name in enumerate(("valence", "arousal")):
        dims[name] = {
            "rmse": rmse(p[:, i], t[:, i]),
            "corr": pearson(p[:, i], t[:, i]),
            "sagr": sagr(p[:, i], t[:, i]),
            "ccc": ccc(p[:, i], t[:, i]),
        }
    return RegressionReport(valence=dims["valence"], arousal=dims["arousal"])
