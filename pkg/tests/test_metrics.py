import numpy as np
import pytest

from rfs.errors import UndefinedMetricError
from rfs.metrics import leo, roc_auc, sp, youden_threshold


def auc_pair_counting(scores, y):
    """O(n^2) enumeration oracle: wins + half ties over all pos/neg pairs."""
    pos = [v for v, t in zip(scores, y) if t == 1]
    neg = [v for v, t in zip(scores, y) if t == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def youden_sweep_oracle(scores, y):
    n_pos, n_neg = int(np.sum(y)), int(np.sum(1 - y))
    uniq = np.unique(scores)
    cands = np.concatenate(([0.0], (uniq[:-1] + uniq[1:]) / 2.0, [1.0]))
    best_t, best_j = None, -np.inf
    for t in np.unique(cands):
        pred = scores >= t
        j = np.sum(pred & (y == 1)) / n_pos - np.sum(pred & (y == 0)) / n_neg
        if j > best_j + 1e-15:
            best_t, best_j = t, j
    return best_t, best_j


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc([0.1, 0.9], [0, 1]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.4] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(4, 31)
            y = rng.integers(0, 2, n)
            if y.min() == y.max():
                continue
            scores = np.round(rng.random(n), 2)  # rounded to force ties
            assert roc_auc(scores, y) == auc_pair_counting(scores, y)

    def test_complement_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = rng.integers(5, 25)
            y = rng.integers(0, 2, n)
            if y.min() == y.max():
                continue
            scores = rng.random(n)
            assert roc_auc(1 - scores, 1 - y) == pytest.approx(roc_auc(scores, y), abs=1e-12)
            assert roc_auc(scores, y) + roc_auc(scores, 1 - y) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, 30)
        y[0], y[1] = 0, 1
        scores = rng.random(30)
        squashed = 1.0 / (1.0 + np.exp(-(3.0 * scores - 1.0)))
        assert roc_auc(squashed, y) == pytest.approx(roc_auc(scores, y), abs=1e-12)

    def test_single_class_raises(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc([0.2, 0.4], [1, 1])


class TestYouden:
    def test_separable_midpoint(self):
        assert youden_threshold([0.2, 0.8], [0, 1]) == pytest.approx(0.5)

    def test_degenerate_all_equal(self):
        assert youden_threshold([0.3, 0.3, 0.3], [0, 1, 0]) == 0.0

    def test_matches_sweep_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = 15
            y = rng.integers(0, 2, n)
            if y.min() == y.max():
                continue
            scores = np.round(rng.random(n), 2)
            t = youden_threshold(scores, y)
            t_oracle, j_oracle = youden_sweep_oracle(scores, y)
            assert t == pytest.approx(t_oracle, abs=1e-12)
            pred = scores >= t
            j = np.sum(pred & (y == 1)) / y.sum() - np.sum(pred & (y == 0)) / (n - y.sum())
            assert j == pytest.approx(j_oracle, abs=1e-12)


class TestSp:
    def test_identical_groups(self):
        scores = np.array([0.1, 0.9, 0.3, 0.7] * 2)
        y = np.array([0, 1, 0, 1] * 2)
        s = np.array([0] * 4 + [1] * 4)
        assert sp(scores, y, s, 0.5) == 0.0

    def test_maximal_gap(self):
        # group 1 classified all-default (TPR=FPR=1), group 0 none
        scores = np.array([0.9, 0.9, 0.1, 0.1])
        y = np.array([1, 0, 1, 0])
        s = np.array([1, 1, 0, 0])
        assert sp(scores, y, s, 0.5) == 1.0

    def test_hand_counted_12_points(self):
        scores = np.array([0.9, 0.8, 0.35, 0.2, 0.75, 0.6, 0.3, 0.1,
                           0.85, 0.55, 0.45, 0.05])
        y = np.array([1, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1, 0])
        s = np.array([1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        t = youden_threshold(scores, y)
        # group 1: pos scores (.9,.8,.75) neg (.35,.2,.6); group 0: pos (.3,.85,.45) neg (.1,.05,.55)
        pred = scores >= t
        tpr1 = pred[(s == 1) & (y == 1)].mean()
        fpr1 = pred[(s == 1) & (y == 0)].mean()
        tpr0 = pred[(s == 0) & (y == 1)].mean()
        fpr0 = pred[(s == 0) & (y == 0)].mean()
        want = 0.5 * abs((fpr1 - fpr0) + (tpr1 - tpr0))
        assert sp(scores, y, s, t) == pytest.approx(want, abs=1e-12)

    def test_undefined_group_raises(self):
        with pytest.raises(UndefinedMetricError):
            sp([0.2, 0.8, 0.5], [0, 1, 1], [0, 0, 1], 0.5)  # group 1 has no negatives


class TestLeo:
    def test_constant_predictor(self):
        scores = np.full(8, 0.37)
        y = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        s = np.array([1, 1, 0, 0, 1, 1, 0, 0])
        assert leo(scores, y, s) == 0.0

    def test_analytic_gap(self):
        scores = np.array([np.exp(-1.0), np.exp(-1.0), 1.0, 1.0])
        y = np.ones(4, dtype=int)
        s = np.array([1, 1, 0, 0])
        # protected mean 1+ln(e^-1)=0, non-protected 1+ln(1)=1
        assert leo(np.clip(scores, 0, 1), y, s) == pytest.approx(1.0, abs=1e-9)

    def test_direct_arithmetic(self):
        rng = np.random.default_rng(4)
        scores = rng.uniform(0.01, 0.99, 10)
        y = np.array([1, 1, 1, 1, 1, 0, 0, 1, 1, 0])
        s = np.array([1, 1, 0, 0, 1, 0, 1, 0, 1, 0])
        prot = (s == 1) & (y == 1)
        nonp = (s == 0) & (y == 1)
        want = abs((1 + np.log(scores[prot])).mean() - (1 + np.log(scores[nonp])).mean())
        assert leo(scores, y, s) == pytest.approx(want, abs=1e-12)

    def test_group_swap_invariance(self):
        rng = np.random.default_rng(5)
        scores = rng.uniform(0.05, 0.95, 12)
        y = rng.integers(0, 2, 12)
        y[:4] = 1
        s = np.array([0, 0, 1, 1] * 3)
        assert leo(scores, y, s) == pytest.approx(leo(scores, y, 1 - s), abs=1e-12)

    def test_empty_subgroup_raises(self):
        with pytest.raises(UndefinedMetricError):
            leo([0.5, 0.5], [1, 0], [0, 1])  # no protected defaulters
