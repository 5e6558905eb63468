"""Imputation accuracy metrics, evaluated on the hidden entries only."""

from __future__ import annotations

import numpy as np

MAPE_ZERO_EPS = 1e-8


def _gather(truth, estimate, eval_set):
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    sel = np.asarray(eval_set, dtype=bool)
    if truth.shape != estimate.shape or sel.shape != truth.shape:
        raise ValueError("truth, estimate and eval_set must share one shape")
    return truth[sel], estimate[sel]


def mape_with_counts(truth, estimate, eval_set, eps: float = MAPE_ZERO_EPS):
    """Mean absolute percentage error over eval entries with |truth| >= eps.

    Returns (mape_percent, n_used, n_excluded); near-zero ground truths are
    excluded from the mean but counted.
    """
    t, e = _gather(truth, estimate, eval_set)
    if t.size == 0:
        raise ValueError("evaluation set is empty")
    keep = np.abs(t) >= eps
    n_used = int(keep.sum())
    if n_used == 0:
        raise ValueError("no evaluation entries remain after zero filtering")
    value = 100.0 * float(np.mean(np.abs(t[keep] - e[keep]) / np.abs(t[keep])))
    return value, n_used, int(t.size - n_used)


def mape(truth, estimate, eval_set, eps: float = MAPE_ZERO_EPS) -> float:
    return mape_with_counts(truth, estimate, eval_set, eps)[0]


def rmse(truth, estimate, eval_set) -> float:
    t, e = _gather(truth, estimate, eval_set)
    if t.size == 0:
        raise ValueError("evaluation set is empty")
    return float(np.sqrt(np.mean((t - e) ** 2)))
