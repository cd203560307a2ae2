"""Numerically stable primitives shared across the package."""

from __future__ import annotations

from typing import Callable

import numpy as np

# Largest double below 1 and smallest positive double; sigmoid never returns 0 or 1.
_SIG_HI = np.nextafter(1.0, 0.0)
_SIG_LO = np.nextafter(0.0, 1.0)


def stable_sigmoid(x):
    """Logistic function that never overflows.

    Accepts a scalar or an array; returns the same kind. Outputs are clipped
    to the open interval (0, 1) so saturated inputs stay strictly inside it.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    np.clip(out, _SIG_LO, _SIG_HI, out=out)
    if out.ndim == 0:
        return float(out)
    return out


def log_softmax_row(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty logits")
    shifted = v - v.max()
    return shifted - np.log(np.exp(shifted).sum())


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax of a 2-D array."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ValueError("empty logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def normalize_positive(v) -> np.ndarray:
    """Scale a nonnegative vector so it sums to one."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("negative entries")
    total = v.sum()
    if not total > 0:
        raise ValueError("degenerate distribution")
    return v / total


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function at ``x``."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for k in range(flat_x.size):
        orig = flat_x[k]
        flat_x[k] = orig + h
        fp = f(x)
        flat_x[k] = orig - h
        fm = f(x)
        flat_x[k] = orig
        flat_g[k] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> float:
    """Largest entrywise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))
