"""External clustering metrics against ground-truth labels.

Label values are arbitrary integers; only the induced partitions matter.
The optimal cluster-to-class matching is delegated to scipy's Hungarian
solver; mutual information and pair counting are computed directly so the
normalization variants and degenerate cases stay pinned down here.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError


def _check_labels(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.ndim != 1 or y_pred.ndim != 1:
        raise ValidationError("labels must be 1-d arrays")
    if y_true.shape != y_pred.shape:
        raise ValidationError(
            f"label lengths differ: {y_true.shape[0]} vs {y_pred.shape[0]}"
        )
    if y_true.size == 0:
        raise ValidationError("labels must be non-empty")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError(f"{name} must contain integers")
    return y_true, y_pred


def contingency_matrix(y_true, y_pred) -> np.ndarray:
    """Counts n[i, j] of items with true class i and predicted cluster j."""
    y_true, y_pred = _check_labels(y_true, y_pred)
    _, ti = np.unique(y_true, return_inverse=True)
    _, pi = np.unique(y_pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def clustering_accuracy(y_true, y_pred) -> float:
    """Best accuracy over injective cluster-to-class matchings."""
    table = contingency_matrix(y_true, y_pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / np.asarray(y_true).size)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(y_true, y_pred, normalization: str = "arithmetic") -> float:
    """Normalized mutual information in [0, 1].

    normalization: "arithmetic" divides MI by the mean of the two label
    entropies, "geometric" by their geometric mean.  Two constant labelings
    agree perfectly (1.0); when exactly one side is constant the MI is zero
    and so is the score.
    """
    if normalization not in ("arithmetic", "geometric"):
        raise ValidationError(
            f"normalization must be 'arithmetic' or 'geometric', "
            f"got {normalization!r}"
        )
    table = contingency_matrix(y_true, y_pred).astype(np.float64)
    n = table.sum()
    h_true = _entropy(table.sum(axis=1))
    h_pred = _entropy(table.sum(axis=0))
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    p = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    mask = p > 0
    mi = float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))
    mi = max(mi, 0.0)
    denom = (0.5 * (h_true + h_pred) if normalization == "arithmetic"
             else np.sqrt(h_true * h_pred))
    return float(min(mi / denom, 1.0))


def ari(y_true, y_pred) -> float:
    """Adjusted Rand index via pair counting; 1.0 for identical partitions,
    around 0 for independent ones.  Degenerate pairs whose expected and
    maximum index coincide (both sides constant, or both all-singleton)
    score 1.0."""
    table = contingency_matrix(y_true, y_pred).astype(np.float64)
    n = table.sum()

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


def marginal_entropy(labels) -> float:
    """Entropy (nats) of the hard-assignment frequencies.

    ln K for a perfectly balanced K-way assignment, 0 when everything lands
    in one cluster; the anti-collapse check compares against these poles.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValidationError("labels must be a non-empty 1-d array")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError("labels must contain integers")
    _, counts = np.unique(labels, return_counts=True)
    return _entropy(counts.astype(np.float64))
