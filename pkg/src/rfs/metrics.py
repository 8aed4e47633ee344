"""Score-quality and fairness metrics.

All metrics operate on a score vector ``y_score`` in [0, 1] (predicted
probability of default), binary labels ``y`` (1 = default) and, for the
fairness metrics, a binary group vector ``s`` (1 = protected).
"""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError

# producers clamp scores to [SCORE_EPS, 1 - SCORE_EPS] so log scores stay finite
SCORE_EPS = 1e-12


def _validate(y_score, y):
    y_score = np.asarray(y_score, dtype=float)
    y = np.asarray(y)
    if y_score.shape != y.shape:
        raise ValueError(f"shape mismatch: scores {y_score.shape} vs labels {y.shape}")
    if not np.all(np.isfinite(y_score)):
        raise ValueError("non-finite scores")
    if y_score.size and (y_score.min() < 0.0 or y_score.max() > 1.0):
        raise ValueError("scores outside [0, 1]")
    return y_score, y.astype(int)


def roc_auc(y_score, y) -> float:
    """Area under the ROC curve via the rank statistic (ties get average rank).

    Equals P(score of a random positive > score of a random negative)
    plus half the tie probability.
    """
    y_score, y = _validate(y_score, y)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("roc_auc needs both classes present")
    ranks = rankdata(y_score, method="average")
    pos_rank_sum = ranks[y == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _threshold_candidates(y_score):
    uniq = np.unique(y_score)
    mids = (uniq[:-1] + uniq[1:]) / 2.0 if uniq.size > 1 else np.empty(0)
    return np.unique(np.concatenate(([0.0], mids, [1.0])))


def youden_threshold(y_score, y) -> float:
    """Threshold maximizing Youden's J = TPR - FPR.

    Candidates are midpoints of consecutive distinct scores plus {0, 1};
    prediction rule is ``score >= t``; ties resolve to the smallest threshold.
    """
    y_score, y = _validate(y_score, y)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("youden_threshold needs both classes present")
    best_t, best_j = 0.0, -np.inf
    for t in _threshold_candidates(y_score):
        pred = y_score >= t
        tpr = np.count_nonzero(pred & (y == 1)) / n_pos
        fpr = np.count_nonzero(pred & (y == 0)) / n_neg
        j = tpr - fpr
        if j > best_j + 1e-15:
            best_t, best_j = float(t), j
    return best_t


def group_rates(y_score, y, mask, t):
    """(TPR, FPR) in the rows selected by ``mask`` at threshold ``t``.

    Raises UndefinedMetricError when a denominator is empty; rates are never
    silently reported as 0.
    """
    pred = y_score >= t
    pos = mask & (y == 1)
    neg = mask & (y == 0)
    if not pos.any() or not neg.any():
        raise UndefinedMetricError("group lacks positives or negatives; rate undefined")
    tpr = np.count_nonzero(pred & pos) / np.count_nonzero(pos)
    fpr = np.count_nonzero(pred & neg) / np.count_nonzero(neg)
    return float(tpr), float(fpr)


def sp(y_score, y, s, t) -> float:
    """Separation gap 0.5 * |delta FPR + delta TPR| between groups at threshold t."""
    y_score, y = _validate(y_score, y)
    s = np.asarray(s).astype(int)
    tpr1, fpr1 = group_rates(y_score, y, s == 1, t)
    tpr0, fpr0 = group_rates(y_score, y, s == 0, t)
    return float(0.5 * abs((fpr1 - fpr0) + (tpr1 - tpr0)))


def leo(y_score, y, s) -> float:
    """Log probabilistic equalized opportunities.

    Absolute gap between protected and non-protected defaulters' mean
    (1 + ln score); threshold-free.
    """
    y_score, y = _validate(y_score, y)
    s = np.asarray(s).astype(int)
    prot = (s == 1) & (y == 1)
    nonprot = (s == 0) & (y == 1)
    if not prot.any() or not nonprot.any():
        raise UndefinedMetricError("leo needs defaulters in both groups")
    logs = 1.0 + np.log(np.clip(y_score, SCORE_EPS, None))
    return float(abs(logs[prot].mean() - logs[nonprot].mean()))
