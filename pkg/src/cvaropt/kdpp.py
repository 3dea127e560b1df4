"""Diagonal k-DPP marginals over item weights, exact and approximate.

A diagonal k-DPP over n items with weights w draws a size-k subset S with
probability proportional to prod_{i in S} w_i. The singleton marginal has
the closed form

    P(i in S) = w_i * e_{k-1}(w_{-i}) / e_k(w),

where e_j is the j-th elementary symmetric polynomial (ESP). The
reference implementation runs in the log domain so subset products never
overflow or underflow; zero weights are represented as -inf log-weights.
``exact_marginals`` first tries a max-scaled linear-domain downdating DP
(much faster for the small n*k sizes the sampler hits every step) and
falls back to a subtraction-free prefix/suffix log-domain route whenever
the fast result fails its own validity checks.

The approximation replaces the exact marginal with a logistic map

    P_hat(i) = w_i e^nu / (1 + w_i e^nu),

with nu chosen so the marginals sum to k. Its total-variation error
against the exact marginals decays like O(1/n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfeasibleConstraintError",
    "Marginals",
    "NuSolution",
    "elementary_symmetric",
    "exact_marginals",
    "solve_nu",
    "approx_marginals",
    "marginals",
    "tv_distance",
    "EXACT_THRESHOLD",
]

# Exact marginals are O(n*k); beyond this size the logistic approximation
# is used by default.
EXACT_THRESHOLD = 64

# Relative-error budget for the downdating recurrence; indices whose
# running error bound exceeds this get a fresh leave-one-out DP.
_DOWNDATE_TOL = 1e-10
_EPS = float(np.finfo(np.float64).eps)

# Bounds under which the max-scaled linear DP cannot overflow a double:
# weight spread below e^300 and log C(n, k) <~ k (log n + 1) <= 650.
_FAST_SPREAD = 300.0
_FAST_LOG_COMB = 650.0
# The downdating recurrence loses accuracy as errors compound over k
# subtractions; past this order the subtraction-free route takes over.
_FAST_K_MAX = 16


class InfeasibleConstraintError(ValueError):
    """Raised when k is incompatible with the number of positive weights."""


@dataclass(frozen=True)
class Marginals:
    """Singleton inclusion probabilities of a size-k subset draw.

    Entries lie in [0, 1] and sum to k (within 1e-8).
    """

    p: np.ndarray
    k: int

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("marginals must form a non-empty 1-d vector")
        if not (1 <= self.k <= p.size):
            raise ValueError(f"k={self.k} out of range for n={p.size}")
        if not np.all(np.isfinite(p)):
            raise ValueError("marginals contain non-finite entries")
        if p.min() < -1e-9 or p.max() > 1.0 + 1e-9:
            raise ValueError("marginals outside [0, 1]")
        if abs(p.sum() - self.k) > 1e-8:
            raise ValueError(
                f"marginals sum to {p.sum():.12g}, expected k={self.k}"
            )
        object.__setattr__(self, "p", np.clip(p, 0.0, 1.0))

    @property
    def n(self) -> int:
        return self.p.size


def _as_log_weights(log_w) -> np.ndarray:
    arr = np.asarray(log_w, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("log-weights must form a non-empty 1-d vector")
    if np.any(np.isnan(arr)) or np.any(arr == np.inf):
        raise ValueError("log-weights must be finite or -inf (zero weight)")
    return arr


def _num_positive(log_w: np.ndarray) -> int:
    return int(np.isfinite(log_w).sum())


def elementary_symmetric(log_w, k: int) -> np.ndarray:
    """Log-domain ESPs: returns log(e_0), ..., log(e_k) of the weights.

    One pass of the recurrence e_j <- e_j + w_i * e_{j-1} per item, carried
    out with logaddexp so no rescaling bookkeeping is needed. O(n*k).
    """
    arr = _as_log_weights(log_w)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    log_e = np.full(k + 1, -np.inf)
    log_e[0] = 0.0
    if k == 0:
        return log_e
    for lw in arr:
        if lw == -np.inf:
            continue
        log_e[1:] = np.logaddexp(log_e[1:], lw + log_e[:-1])
    return log_e


def _esp_linear_loo(w: list, skip: int, k: int) -> float:
    """e_k of the scaled weights with index ``skip`` removed (plain floats)."""
    e = [1.0] + [0.0] * k
    for i, wi in enumerate(w):
        if i == skip or wi == 0.0:
            continue
        for j in range(k, 0, -1):
            e[j] += wi * e[j - 1]
    return e[k]


def _marginals_scaled_linear(arr: np.ndarray, k: int) -> np.ndarray | None:
    """Max-scaled linear-domain marginals, or None when out of safe range.

    Scaling w -> w / max(w) leaves marginals unchanged and caps every
    subset product at 1, so e_j <= C(n, j) and nothing overflows within
    the entry bounds checked below. The result validates itself (finite,
    in [0, 1], sums to k) and declines rather than returning a value that
    fails, letting the caller retry on the subtraction-free route.
    """
    finite = np.isfinite(arr)
    fvals = arr[finite]
    npos = fvals.size
    if k > _FAST_K_MAX:
        return None
    if fvals.max() - fvals.min() > _FAST_SPREAD:
        return None
    if k * (math.log(npos) + 1.0) > _FAST_LOG_COMB:
        return None
    n = arr.size
    w = np.exp(arr - fvals.max())
    e = [1.0] + [0.0] * k
    for wi in w.tolist():
        if wi == 0.0:
            continue
        for j in range(k, 0, -1):
            e[j] += wi * e[j - 1]
    ek = e[k]
    if not 0.0 < ek < math.inf:
        return None
    # Deleted ESPs by downdating: e_j(w_-i) = e_j(w) - w_i e_{j-1}(w_-i).
    # A carries a per-index bound on the absolute error of D, fed by the
    # rounding of each step and amplified by whatever the subtraction
    # cancels; it makes the silent error accumulation of this recurrence
    # visible so bad indices can be recomputed exactly.
    D = np.ones(n)
    A = np.zeros(n)
    for j in range(1, k):
        D = e[j] - w * D
        A = 8.0 * _EPS * e[j] + w * A
    with np.errstate(invalid="ignore", divide="ignore"):
        suspect = ~(A < _DOWNDATE_TOL * np.abs(D))
    if suspect.sum() * 8 > n:
        return None
    p = w * D / ek
    for i in np.flatnonzero(suspect):
        p[i] = w[i] * _esp_linear_loo(w.tolist(), int(i), k - 1) / ek
    if not np.all(np.isfinite(p)):
        return None
    if p.min() < -1e-12 or p.max() > 1.0 + 1e-9 or abs(p.sum() - k) > 5e-9:
        return None
    return np.clip(p, 0.0, 1.0)


def _marginals_log(arr: np.ndarray, k: int) -> np.ndarray:
    """Log-domain marginals via prefix/suffix ESP tables; O(n*k) memory.

    e_{k-1}(w_{-i}) = sum_a e_a(w_{<i}) * e_{k-1-a}(w_{>i}) involves only
    additions, so unlike downdating it cannot lose digits no matter how
    one item dominates. The normalizer comes from the identity
    k * e_k = sum_i w_i e_{k-1}(w_{-i}), which also pins the marginal sum
    to k up to rounding.
    """
    n = arr.size
    # F[t] = log ESPs (orders 0..k-1) of items before t; G[t] = after t-1.
    F = np.full((n + 1, k), -np.inf)
    G = np.full((n + 1, k), -np.inf)
    F[:, 0] = 0.0
    G[:, 0] = 0.0
    for t in range(n):
        F[t + 1] = F[t]
        if k > 1 and arr[t] != -np.inf:
            F[t + 1, 1:] = np.logaddexp(F[t, 1:], arr[t] + F[t, :-1])
    for t in range(n - 1, -1, -1):
        G[t] = G[t + 1]
        if k > 1 and arr[t] != -np.inf:
            G[t, 1:] = np.logaddexp(G[t + 1, 1:], arr[t] + G[t + 1, :-1])
    # Row i: log of e_a(w_{<i}) e_{k-1-a}(w_{>i}) for a = 0..k-1.
    M = F[:n] + G[1:, ::-1]
    m = M.max(axis=1)
    loo = m + np.log(np.exp(M - m[:, None]).sum(axis=1))
    num = arr + loo
    top = np.logaddexp.reduce(num)  # = log(k e_k)
    p = np.exp(np.minimum(num - top, 0.0)) * k
    p[~np.isfinite(arr)] = 0.0
    # The per-row logsumexp rounding is correlated across rows, so at large
    # n*k the total can drift by ~k * 1e-11 even though each entry is fine;
    # scaling by k / sum(p) restores the invariant without moving any entry
    # by more than its own rounding noise.
    s = p.sum()
    if s > 0.0:
        p *= k / s
    return np.minimum(p, 1.0)


def exact_marginals(log_w, k: int) -> Marginals:
    """Exact singleton marginals P(i) = w_i * e_{k-1}(w_{-i}) / e_k(w).

    The deleted ESPs e_{k-1}(w_{-i}) come from the downdating recurrence
    e_j(w_{-i}) = e_j(w) - w_i * e_{j-1}(w_{-i}), vectorized across i.
    Indices where the subtraction cancels more than four decimal digits
    are recomputed with a fresh leave-one-out DP. Runs in the max-scaled
    linear domain when that provably cannot overflow, otherwise in the
    log domain.
    """
    arr = _as_log_weights(log_w)
    npos = _num_positive(arr)
    if not (1 <= k <= npos):
        raise InfeasibleConstraintError(
            f"k={k} infeasible with {npos} positive weights"
        )
    if k == npos:
        # Single admissible support: every positive item is always included.
        p = np.where(np.isfinite(arr), 1.0, 0.0)
        return Marginals(p, k)
    p = _marginals_scaled_linear(arr, k)
    if p is None:
        p = _marginals_log(arr, k)
    return Marginals(p, k)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class NuSolution:
    nu: float
    residual: float
    iterations: int


def solve_nu(log_w, k: int, tol: float = 1e-10, max_iter: int = 200) -> NuSolution:
    """Solve sum_i sigmoid(log_w_i + nu) = k for nu by bisection.

    The map is strictly increasing in nu, so a sign-bracketing interval
    pins the root. The initial bracket is
    [log k - log sum(w) - 40, log k - log min_positive(w) + 40], expanded
    geometrically if either end fails to bracket. Stops when the residual
    drops to ``tol`` or after ``max_iter`` iterations, returning the best
    iterate seen.
    """
    arr = _as_log_weights(log_w)
    finite = arr[np.isfinite(arr)]
    npos = finite.size
    if not (1 <= k < npos):
        raise InfeasibleConstraintError(
            f"nu equation needs 1 <= k < positive count, got k={k}, "
            f"positives={npos}"
        )

    def g(nu: float) -> float:
        return float(_sigmoid(finite + nu).sum() - k)

    log_sum_w = float(np.logaddexp.reduce(finite))
    lo = np.log(k) - log_sum_w - 40.0
    hi = np.log(k) - float(finite.min()) + 40.0
    width = hi - lo
    while g(lo) > 0.0:
        lo -= width
        width *= 2.0
    while g(hi) < 0.0:
        hi += width
        width *= 2.0

    best_nu, best_r = lo, g(lo)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        r = g(mid)
        if abs(r) < abs(best_r):
            best_nu, best_r = mid, r
        if abs(r) <= tol:
            return NuSolution(mid, r, iterations)
        if r < 0.0:
            lo = mid
        else:
            hi = mid
    return NuSolution(best_nu, best_r, iterations)


def approx_marginals(log_w, k: int) -> Marginals:
    """Logistic approximation P_hat(i) = sigmoid(log w_i + nu).

    After solving for nu the marginals are rescaled by k / sum(P_hat) so
    they sum to k exactly, then clipped to [0, 1].
    """
    arr = _as_log_weights(log_w)
    sol = solve_nu(arr, k)
    p = np.zeros(arr.size)
    finite = np.isfinite(arr)
    p[finite] = _sigmoid(arr[finite] + sol.nu)
    p *= k / p.sum()
    return Marginals(np.clip(p, 0.0, 1.0), k)


def marginals(log_w, k: int, exact_threshold: int = EXACT_THRESHOLD) -> Marginals:
    """Dispatch: exact marginals for small n (or saturated k), else approximate."""
    arr = _as_log_weights(log_w)
    if arr.size <= exact_threshold or k >= _num_positive(arr):
        return exact_marginals(arr, k)
    return approx_marginals(arr, k)


def tv_distance(a: Marginals, b: Marginals) -> float:
    """Total variation between the induced singleton distributions p/k."""
    if a.n != b.n:
        raise ValueError(f"marginal vectors differ in length: {a.n} vs {b.n}")
    if a.k != b.k:
        raise ValueError(f"marginal vectors differ in k: {a.k} vs {b.k}")
    return float(0.5 * np.abs(a.p - b.p).sum() / a.k)
