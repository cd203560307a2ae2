"""Skew class-balanced re-weighting statistics.

Pipeline for one mini-batch of subject-object pairs:

1. ``skew_logits``       sigmoid of the non-visual predicate logits
2. ``sample_estimates``  per-predicate pseudo-counts (column sums)
3. ``target_skew``       third standardized moment around the target logit
4. ``entropy_skew``      base-|C_rel| entropy scaled by ``lambda_skew``
5. ``skew_threshold``    batch-mean skew minus ``delta``
6. ``effective_number``  (1 - beta**m) / (1 - beta)

``compute_sample_weights`` strings these together and returns a
:class:`SkewDiagnostics`. Nothing here is differentiated; the weights are
constants from the optimizer's point of view.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from scrsgg.numerics import normalize_positive, stable_sigmoid

DEFAULT_DELTA = 0.7
DEFAULT_LAMBDA_SKEW = 0.06
# beta only reaches 1 when lambda_skew == 0
BETA_CAP = 1.0 - 1e-9
VARIANCE_FLOOR = 1e-12
MIN_ESTIMATE = 1.0


class SkewVariant(enum.Enum):
    EMB = "emb"
    FREQ = "freq"
    FREQ_EMB = "freq-emb"

    @classmethod
    def parse(cls, value: "str | SkewVariant") -> "SkewVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-").replace("+", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown skew variant {value!r}")


@dataclass
class SkewDiagnostics:
    """Per-sample SCR statistics for one batch.

    ``class_weights[i]`` is the full normalized weight vector of sample ``i``
    (it sums to the number of predicate classes); ``weight[i]`` is its entry
    at the sample's target.
    """

    skew: np.ndarray
    entropy: np.ndarray
    beta: np.ndarray
    effective_number: np.ndarray
    weight: np.ndarray
    class_weights: np.ndarray
    estimates: np.ndarray
    threshold: float
    mean_skew: float

    def __len__(self) -> int:
        return len(self.weight)


def skew_logits(freq_logits, emb_logits, variant: SkewVariant) -> np.ndarray:
    freq_logits = np.asarray(freq_logits, dtype=np.float64)
    emb_logits = np.asarray(emb_logits, dtype=np.float64)
    if freq_logits.shape != emb_logits.shape:
        raise ValueError(
            f"shape mismatch: freq {freq_logits.shape} vs emb {emb_logits.shape}"
        )
    variant = SkewVariant.parse(variant)
    if variant is SkewVariant.FREQ:
        z = freq_logits
    elif variant is SkewVariant.EMB:
        z = emb_logits
    else:
        z = freq_logits + emb_logits
    return np.asarray(stable_sigmoid(z), dtype=np.float64).reshape(z.shape)


def sample_estimates(skew: np.ndarray) -> np.ndarray:
    skew = np.asarray(skew, dtype=np.float64)
    if skew.ndim != 2 or skew.shape[0] == 0:
        raise ValueError("empty batch")
    return skew.sum(axis=0)


def target_skew(row, y: int) -> float:
    """Skewness of ``row`` measured around ``row[y]`` instead of its mean."""
    row = np.asarray(row, dtype=np.float64)
    if not 0 <= y < row.size:
        raise IndexError(f"target index {y} out of range for {row.size} classes")
    d = row - row[y]
    m2 = np.mean(d * d)
    if m2 < VARIANCE_FLOOR:
        return 0.0
    m3 = np.mean(d * d * d)
    return float(m3 / m2**1.5)


def batch_target_skew(skew: np.ndarray, targets: np.ndarray) -> np.ndarray:
    rows = np.arange(skew.shape[0])
    d = skew - skew[rows, targets][:, None]
    m2 = np.mean(d * d, axis=1)
    m3 = np.mean(d * d * d, axis=1)
    out = np.zeros_like(m2)
    ok = m2 >= VARIANCE_FLOOR
    out[ok] = m3[ok] / m2[ok] ** 1.5
    return out


def entropy_skew(row, lambda_skew: float = DEFAULT_LAMBDA_SKEW) -> float:
    if lambda_skew <= 0:
        raise ValueError("lambda_skew must be positive")
    p = normalize_positive(row)
    if p.size < 2:
        return 0.0
    nz = p[p > 0]
    h = -np.sum(nz * np.log(nz)) / math.log(p.size)
    return float(min(max(lambda_skew * h, 0.0), lambda_skew))


def batch_entropy_skew(skew: np.ndarray, lambda_skew: float) -> np.ndarray:
    totals = skew.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("degenerate distribution")
    p = skew / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = -plogp.sum(axis=1) / math.log(skew.shape[1])
    return np.clip(lambda_skew * h, 0.0, lambda_skew)


def skew_threshold(skews, delta: float = DEFAULT_DELTA) -> float:
    skews = np.asarray(skews, dtype=np.float64)
    if skews.size == 0:
        raise ValueError("empty skew vector")
    return float(skews.mean() - delta)


def effective_number(beta: float, m: float) -> float:
    """Class-balanced effective number of ``m`` samples at decay ``beta``."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if beta == 0.0:
        return 1.0
    # 1 - beta**m without cancellation for beta near 1
    return -math.expm1(m * math.log(beta)) / (1.0 - beta)


def _effective_number_matrix(beta: np.ndarray, m: np.ndarray) -> np.ndarray:
    out = np.ones((beta.size, m.size))
    on = beta > 0
    if np.any(on):
        b = beta[on][:, None]
        out[on] = -np.expm1(m[None, :] * np.log(b)) / (1.0 - b)
    return out


def compute_sample_weights(
    skew,
    targets,
    delta: float = DEFAULT_DELTA,
    lambda_skew: float = DEFAULT_LAMBDA_SKEW,
) -> SkewDiagnostics:
    """Adaptive effective-number weights for one batch.

    Samples whose target skew exceeds the batch threshold get
    ``beta = 1 - H``; all others get ``beta = 0`` and hence uniform weights.
    Per-class sample estimates are floored at one before the effective number
    is taken.
    """
    skew = np.asarray(skew, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if skew.ndim != 2 or skew.shape[0] == 0:
        raise ValueError("empty batch")
    n, c = skew.shape
    if targets.shape != (n,):
        raise ValueError(f"expected {n} targets, got shape {targets.shape}")
    if np.any(targets < 0) or np.any(targets >= c):
        raise IndexError("target index out of range")
    if lambda_skew < 0:
        raise ValueError("lambda_skew must be nonnegative")

    estimates = sample_estimates(skew)
    s = batch_target_skew(skew, targets)
    h = batch_entropy_skew(skew, lambda_skew) if lambda_skew > 0 else np.zeros(n)
    mean_skew = float(s.mean())
    threshold = mean_skew - delta
    beta = np.where(s > threshold, np.minimum(1.0 - h, BETA_CAP), 0.0)

    m = np.maximum(estimates, MIN_ESTIMATE)
    e_all = _effective_number_matrix(beta, m)
    raw = 1.0 / e_all
    class_weights = raw * (c / raw.sum(axis=1, keepdims=True))
    rows = np.arange(n)
    return SkewDiagnostics(
        skew=s,
        entropy=h,
        beta=beta,
        effective_number=e_all[rows, targets],
        weight=class_weights[rows, targets],
        class_weights=class_weights,
        estimates=estimates,
        threshold=threshold,
        mean_skew=mean_skew,
    )


def uniform_diagnostics(num_samples: int, num_classes: int) -> SkewDiagnostics:
    """Diagnostics equivalent to plain cross-entropy (every weight is one)."""
    zeros = np.zeros(num_samples)
    return SkewDiagnostics(
        skew=zeros.copy(),
        entropy=zeros.copy(),
        beta=zeros.copy(),
        effective_number=np.ones(num_samples),
        weight=np.ones(num_samples),
        class_weights=np.ones((num_samples, num_classes)),
        estimates=np.zeros(num_classes),
        threshold=math.inf,
        mean_skew=0.0,
    )
