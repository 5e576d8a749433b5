"""Phase-tolerant evaluation: truth at time i is matched against the
prediction anywhere in i +/- w, so a prediction that drifts slightly out of
phase is not punished as if it had missed the oscillation entirely."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, ShapeError


def evaluate_phase_window(pred: np.ndarray, truth: np.ndarray, w: int) -> float:
    """Per-cell mean absolute error with a +/-w offset search.

    error_i = min over o in [-w, w] (valid indices only) of
    mean_c |pred[i+o, c] - truth[i, c]|; returns the mean over i.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.ndim != 2:
        raise ShapeError(f"expected (T, cells) arrays, got {pred.shape}")
    t = pred.shape[0]
    if w < 0:
        raise InvalidArgumentError(f"phase window must be >= 0, got {w}")
    if w >= t:
        raise InvalidArgumentError(f"phase window {w} must be smaller than the series length {t}")
    best = np.full(t, np.inf)
    for o in range(-w, w + 1):
        lo = max(0, -o)
        hi = min(t, t - o)
        err = np.abs(pred[lo + o : hi + o] - truth[lo:hi]).mean(axis=1)
        np.minimum(best[lo:hi], err, out=best[lo:hi])
    return float(best.mean())
