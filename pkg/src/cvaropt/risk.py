"""Empirical tail-risk primitives: VaR, CVaR, the dual objective, and the
worst-case reweighting over the capped simplex.

Conventions used throughout the package:

* a loss vector is a 1-d float array with every entry in [0, 1];
* the tail size is ``k = floor(alpha * n)`` and must be at least 1;
* empirical CVaR is the mean of the k largest losses (ties resolved by
  value, so the k-th largest may repeat);
* the capped simplex at level alpha is
  ``{q : 0 <= q_i <= 1/k, sum_i q_i = 1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RiskLevel",
    "as_losses",
    "check_capped_simplex",
    "empirical_var",
    "empirical_cvar",
    "rockafellar_objective",
    "dro_inner_max",
    "topk_mean",
]


@dataclass(frozen=True)
class RiskLevel:
    """Tail level alpha bound to a sample size n, with k = floor(alpha * n).

    Raises ValueError when alpha is outside (0, 1] or when the implied tail
    is empty (floor(alpha * n) == 0).
    """

    alpha: float
    n: int
    k: int = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        # +1e-9 guard: alpha built as k/n in floating point must give back k.
        k = int(math.floor(self.alpha * self.n + 1e-9))
        if k < 1:
            raise ValueError(
                f"floor(alpha * n) = 0 for alpha={self.alpha}, n={self.n}; "
                "the tail must contain at least one example"
            )
        object.__setattr__(self, "k", min(k, self.n))


def as_losses(values) -> np.ndarray:
    """Validate and return a loss vector (1-d float64, entries in [0, 1])."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"loss vector must be 1-d and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss vector contains non-finite entries")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"loss entries must lie in [0, 1], got range "
            f"[{arr.min():.6g}, {arr.max():.6g}]"
        )
    return arr


def check_capped_simplex(q, k: int, atol: float = 1e-9) -> np.ndarray:
    """Validate membership of the capped simplex {0 <= q_i <= 1/k, sum = 1}."""
    arr = np.asarray(q, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("q must be a non-empty 1-d vector")
    if not (1 <= k <= arr.size):
        raise ValueError(f"k={k} out of range for n={arr.size}")
    if arr.min() < -atol or arr.max() > 1.0 / k + atol:
        raise ValueError(f"q entries outside [0, 1/k] for k={k}")
    if abs(arr.sum() - 1.0) > atol:
        raise ValueError(f"q sums to {arr.sum():.12g}, expected 1")
    return arr


def topk_mean(values: np.ndarray, k: int) -> float:
    """Mean of the k largest entries (no [0,1] restriction on the input)."""
    arr = np.asarray(values, dtype=np.float64)
    if not (1 <= k <= arr.size):
        raise ValueError(f"k={k} out of range for n={arr.size}")
    if k == arr.size:
        return float(arr.mean())
    return float(np.partition(arr, arr.size - k)[arr.size - k :].mean())


def empirical_var(losses, level: RiskLevel) -> float:
    """Value-at-risk: the k-th largest loss."""
    arr = as_losses(losses)
    _check_size(arr, level)
    return float(np.partition(arr, arr.size - level.k)[arr.size - level.k])


def empirical_cvar(losses, level: RiskLevel) -> float:
    """Conditional value-at-risk: the mean of the k largest losses."""
    arr = as_losses(losses)
    _check_size(arr, level)
    return topk_mean(arr, level.k)


def rockafellar_objective(losses, ell: float, level: RiskLevel) -> float:
    """Dual objective ell + (1/(alpha*n)) * sum_i max(0, L_i - ell).

    Minimizing over ell recovers the empirical CVaR when alpha*n is an
    integer, with the minimum attained at ell = empirical VaR.
    """
    arr = as_losses(losses)
    _check_size(arr, level)
    excess = np.maximum(arr - ell, 0.0)
    return float(ell + excess.sum() / (level.alpha * arr.size))


def dro_inner_max(losses, level: RiskLevel) -> tuple[float, np.ndarray]:
    """Maximize q . L over the capped simplex.

    The maximum sits at a vertex: weight 1/k on each of the k largest
    losses, ties broken toward the lower index. Returns (value, argmax q).
    """
    arr = as_losses(losses)
    _check_size(arr, level)
    k = level.k
    # Stable sort of the negated vector: descending by loss, ties keep the
    # original (lower-index-first) order.
    order = np.argsort(-arr, kind="stable")[:k]
    q = np.zeros(arr.size)
    q[order] = 1.0 / k
    value = float(arr[order].sum() / k)
    return value, q


def _check_size(arr: np.ndarray, level: RiskLevel) -> None:
    if arr.size != level.n:
        raise ValueError(f"loss vector has n={arr.size}, level built for n={level.n}")
