"""Metric tests with brute-force oracles.

The exhaustive block enumerates every predicted labeling with up to three
clusters for small N and checks the package implementations against
independent element-loop oracles.
"""

import itertools
import math

import numpy as np
import pytest

from cludi.errors import ValidationError
from cludi.metrics import (
    ari,
    clustering_accuracy,
    contingency_matrix,
    marginal_entropy,
    nmi,
)

Y4 = np.array([0, 0, 1, 1])

# hand-derived: MI = ln 2, H_true = ln 2, H_pred = 1.5 ln 2
NMI_ARITH_CASE = 0.8
NMI_GEOM_CASE = 0.816496580927726  # sqrt(2/3)


def _brute_accuracy(y_true, y_pred):
    """Best injective map from predicted clusters to true classes."""
    true_vals = sorted(set(y_true))
    pred_vals = sorted(set(y_pred))
    size = max(len(true_vals), len(pred_vals))
    best = 0
    for perm in itertools.permutations(range(size), len(pred_vals)):
        hits = 0
        for yt, yp in zip(y_true, y_pred):
            j = perm[pred_vals.index(yp)]
            if j < len(true_vals) and true_vals[j] == yt:
                hits += 1
        best = max(best, hits)
    return best / len(y_true)


def _brute_ari(y_true, y_pred):
    """Pair-counting oracle: (index - expected) / (max - expected)."""
    n = len(y_true)
    a = b = c = 0
    for i in range(n):
        for j in range(i + 1, n):
            st = y_true[i] == y_true[j]
            sp = y_pred[i] == y_pred[j]
            a += st and sp
            b += st and not sp
            c += sp and not st
    ab, ac = a + b, a + c
    total = n * (n - 1) / 2
    expected = ab * ac / total
    maximum = (ab + ac) / 2
    if maximum == expected:
        return 1.0
    return (a - expected) / (maximum - expected)


def _brute_nmi(y_true, y_pred):
    n = len(y_true)
    tv, pv = sorted(set(y_true)), sorted(set(y_pred))
    joint = {}
    for yt, yp in zip(y_true, y_pred):
        joint[(yt, yp)] = joint.get((yt, yp), 0) + 1
    pt = {v: sum(1 for y in y_true if y == v) / n for v in tv}
    pp = {v: sum(1 for y in y_pred if y == v) / n for v in pv}
    ht = -sum(p * math.log(p) for p in pt.values() if p > 0)
    hp = -sum(p * math.log(p) for p in pp.values() if p > 0)
    if ht == 0.0 and hp == 0.0:
        return 1.0
    if ht == 0.0 or hp == 0.0:
        return 0.0
    mi = sum(
        (c / n) * math.log((c / n) / (pt[t] * pp[p]))
        for (t, p), c in joint.items()
    )
    return max(mi, 0.0) / ((ht + hp) / 2)


class TestContingency:
    def test_hand_table(self):
        table = contingency_matrix(Y4, np.array([0, 0, 1, 2]))
        np.testing.assert_array_equal(table, [[2, 0, 0], [0, 1, 1]])

    def test_non_contiguous_labels(self):
        table = contingency_matrix(np.array([7, 7, -2]), np.array([100, 5, 5]))
        assert table.sum() == 3
        assert table.shape == (2, 2)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            contingency_matrix(np.array([1, 2]), np.array([1]))
        with pytest.raises(ValidationError):
            contingency_matrix(np.array([1.5, 2.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValidationError):
            contingency_matrix(np.array([], dtype=int), np.array([], dtype=int))


class TestAccuracy:
    def test_relabeled_perfect(self):
        assert clustering_accuracy(Y4, np.array([1, 1, 0, 0])) == 1.0

    def test_half_right(self):
        assert clustering_accuracy(Y4, np.array([0, 1, 0, 1])) == 0.5

    def test_more_clusters_than_classes(self):
        assert clustering_accuracy(Y4, np.array([2, 2, 3, 4])) == 0.75

    def test_single_cluster_prediction(self):
        assert clustering_accuracy(Y4, np.array([0, 0, 0, 0])) == 0.5


class TestNmi:
    def test_identical_is_one(self):
        assert nmi(Y4, Y4) == pytest.approx(1.0)

    def test_independent_is_zero(self):
        assert nmi(Y4, np.array([0, 1, 0, 1])) == pytest.approx(0.0, abs=1e-12)

    def test_frozen_arithmetic_value(self):
        assert nmi(Y4, np.array([0, 0, 1, 2])) == pytest.approx(
            NMI_ARITH_CASE, rel=1e-12
        )

    def test_frozen_geometric_value(self):
        assert nmi(Y4, np.array([0, 0, 1, 2]), "geometric") == pytest.approx(
            NMI_GEOM_CASE, rel=1e-12
        )

    def test_both_constant_is_one(self):
        assert nmi(np.zeros(5, dtype=int), np.full(5, 3)) == 1.0

    def test_one_constant_is_zero(self):
        assert nmi(Y4, np.zeros(4, dtype=int)) == 0.0
        assert nmi(np.zeros(4, dtype=int), Y4) == 0.0

    def test_rejects_unknown_normalization(self):
        with pytest.raises(ValidationError):
            nmi(Y4, Y4, "harmonic")


class TestAri:
    def test_identical_is_one(self):
        assert ari(Y4, np.array([5, 5, 9, 9])) == 1.0

    def test_frozen_crossed_value(self):
        assert ari(Y4, np.array([0, 1, 0, 1])) == pytest.approx(-0.5, rel=1e-12)

    def test_both_constant_is_one(self):
        assert ari(np.zeros(4, dtype=int), np.ones(4, dtype=int)) == 1.0

    def test_all_singletons_both_sides_is_one(self):
        y = np.arange(5)
        assert ari(y, np.array([4, 2, 0, 1, 3])) == 1.0

    def test_near_zero_for_random_labels(self):
        rng = np.random.default_rng(0)
        vals = [
            ari(rng.integers(0, 4, size=500), rng.integers(0, 4, size=500))
            for _ in range(20)
        ]
        assert abs(np.mean(vals)) < 0.01


class TestMarginalEntropy:
    def test_balanced_is_log_k(self):
        labels = np.repeat(np.arange(5), 10)
        assert marginal_entropy(labels) == pytest.approx(np.log(5.0), rel=1e-12)

    def test_collapsed_is_zero(self):
        assert marginal_entropy(np.full(10, 2)) == 0.0

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            marginal_entropy(np.array([], dtype=int))


class TestExhaustiveOracles:
    """Every predicted labeling with <= 3 clusters for small N, against
    element-loop oracles with no shared code."""

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_all_labelings(self, n):
        rng = np.random.default_rng(n)
        truths = [
            np.repeat(np.arange(2), n // 2),
            rng.integers(0, 3, size=n),
        ]
        for y_true in truths:
            for pred_tuple in itertools.product(range(3), repeat=n):
                y_pred = np.array(pred_tuple)
                t_list, p_list = y_true.tolist(), list(pred_tuple)
                assert clustering_accuracy(y_true, y_pred) == pytest.approx(
                    _brute_accuracy(t_list, p_list), abs=1e-12
                )
                assert ari(y_true, y_pred) == pytest.approx(
                    _brute_ari(t_list, p_list), abs=1e-12
                )
                assert nmi(y_true, y_pred) == pytest.approx(
                    _brute_nmi(t_list, p_list), abs=1e-10
                )
