"""Scalar accuracy metrics and static-noise-margin extraction."""

from __future__ import annotations

import numpy as np


def r_squared(pred, truth) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("r_squared needs equal, nonzero lengths")
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("r_squared undefined for constant truth")
    return float(1.0 - np.sum((pred - truth) ** 2) / ss_tot)


def relative_errors(pred, truth, floor: float) -> np.ndarray:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError("relative error needs equal lengths")
    if not floor > 0:
        raise ValueError("floor must be positive")
    return np.abs(pred - truth) / np.maximum(np.abs(truth), floor)


def mean_rel_error(pred, truth, floor: float) -> float:
    """Mean of |p - t| / max(|t|, floor)."""
    return float(np.mean(relative_errors(pred, truth, floor)))


def _rotated(x, y):
    # u runs across the 45-degree diagonal, w along it
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (y - x) / np.sqrt(2.0), (x + y) / np.sqrt(2.0)


def _w_of_u(x, y):
    u, w = _rotated(x, y)
    order = np.argsort(u, kind="stable")
    u, w = u[order], w[order]
    keep = np.concatenate([[True], np.diff(u) > 0])
    return u[keep], w[keep]


def snm_extract(curve1, curve2, n_points: int = 4001) -> float:
    """Static noise margin of a butterfly plot.

    Both curves are ``(x, y)`` sample arrays drawn in the same plane (the second
    one already axis-swapped). In coordinates rotated by 45 degrees the side of
    the largest square in a lobe is the largest separation along the diagonal
    divided by sqrt(2); the SNM is the smaller of the two lobes, and 0 when a
    lobe is missing.
    """
    u1, w1 = _w_of_u(*curve1)
    u2, w2 = _w_of_u(*curve2)
    lo, hi = max(u1[0], u2[0]), min(u1[-1], u2[-1])
    if not hi > lo:
        return 0.0
    u = np.linspace(lo, hi, n_points)
    diff = np.interp(u, u1, w1) - np.interp(u, u2, w2)
    lobe_a = max(float(diff.max()), 0.0)
    lobe_b = max(float(-diff.min()), 0.0)
    return min(lobe_a, lobe_b) / np.sqrt(2.0)


def zero_crossings(x, y) -> np.ndarray:
    """Linearly interpolated abscissae where ``y`` changes sign (exact zeros count once)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.sign(y)
    out = []
    last = None  # index of last nonzero sample
    for k in range(len(y)):
        if s[k] == 0:
            continue
        if last is not None and s[k] != s[last]:
            zeros = np.nonzero(s[last + 1:k] == 0)[0]
            if zeros.size:
                out.append(x[last + 1 + zeros[0]])
            else:
                out.append(x[last] - y[last] * (x[k] - x[last]) / (y[k] - y[last]))
        last = k
    return np.array(out)
