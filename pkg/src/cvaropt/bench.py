"""Sampler-only micro-benchmarks.

Two standalone simulations, both free of any learner:

* ``regret_bench`` plays the index sampler against a synthetic loss
  stream and measures cumulative regret against the best fixed
  capped-simplex distribution in hindsight, across a geometric horizon
  grid. Sublinear growth shows up as a log-log slope < 1.
* ``marginals_bench`` measures the total-variation gap between exact
  subset-inclusion marginals and the logistic approximation as the
  ground-set size grows; the gap should shrink roughly like 1/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kdpp import approx_marginals, exact_marginals, tv_distance
from .risk import RiskLevel, topk_mean
from .sampler import EtaSchedule, KdppSampler, LossEstimate

__all__ = [
    "LOSS_MODELS",
    "EXACT_FEASIBLE_MAX",
    "RegretBenchResult",
    "MarginalsBenchResult",
    "regret_run",
    "regret_bench",
    "marginals_bench",
]

LOSS_MODELS = ("constant", "topk-bernoulli")

# Largest ground set for which the exact-marginal side of the TV
# benchmark is still reasonable to compute.
EXACT_FEASIBLE_MAX = 2000


def _loss_vector(model: str, rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    if model == "constant":
        return np.full(n, 0.5)
    # Designated top-k: the first k indices pay Bernoulli(0.9) losses,
    # the rest Bernoulli(0.1), so the best fixed distribution is known.
    p = np.full(n, 0.1)
    p[:k] = 0.9
    return (rng.random(n) < p).astype(np.float64)


def regret_run(
    n: int,
    k: int,
    horizon: int,
    loss_model: str = "topk-bernoulli",
    seed: int = 0,
    gamma: float = 0.01,
    eta0: float = 1.0,
) -> float:
    """One sampler-vs-loss-stream episode; returns the cumulative regret.

    The sampler runs a fixed-horizon learning rate tuned to ``horizon``.
    Regret is the mean of the k largest accumulated per-index losses
    (the best fixed capped-simplex distribution, evaluated in closed
    form) minus the q_t . L_t mass the sampler actually collected.
    """
    if loss_model not in LOSS_MODELS:
        raise ValueError(f"unknown loss model {loss_model!r}; pick from {LOSS_MODELS}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    level = RiskLevel(k / n, n)
    if level.k != k:
        raise ValueError(f"k={k} not representable at n={n}")
    sampler = KdppSampler(
        level, EtaSchedule("fixed-horizon", eta0), gamma=gamma, horizon=horizon
    )
    rng = np.random.default_rng(seed)
    cum = np.zeros(n)
    sampled_mass = 0.0
    for _ in range(horizon):
        losses = _loss_vector(loss_model, rng, n, k)
        q = sampler.distribution()
        i = sampler.draw(rng.random())
        sampler.update(LossEstimate(i, float(losses[i]), float(q[i])))
        cum += losses
        sampled_mass += float(q @ losses)
    return float(topk_mean(cum, k) - sampled_mass)


@dataclass
class RegretBenchResult:
    n: int
    k: int
    loss_model: str
    horizons: list[int]
    per_seed: dict[int, list[float]] = field(default_factory=dict)

    def median(self, horizon: int) -> float:
        return float(np.median(self.per_seed[horizon]))

    @property
    def medians(self) -> list[float]:
        return [self.median(t) for t in self.horizons]

    @property
    def slope(self) -> float:
        """Log-log growth exponent of the median regret over the grid."""
        if len(self.horizons) < 2:
            return math.nan
        meds = np.asarray(self.medians)
        if np.any(meds <= 0.0):
            return math.nan
        return float(np.polyfit(np.log(self.horizons), np.log(meds), 1)[0])

    def rows(self) -> list[dict]:
        out = []
        for t in self.horizons:
            for seed, value in enumerate(self.per_seed[t]):
                out.append({"T": t, "seed": seed, "regret": value})
        return out


def horizon_grid(horizon: int) -> list[int]:
    """The {T/100, T/10, T} measurement grid, deduplicated."""
    if horizon <= 0:
        return []
    return sorted({max(1, horizon // 100), max(1, horizon // 10), horizon})


def regret_bench(
    n: int,
    k: int,
    horizon: int,
    loss_model: str = "topk-bernoulli",
    seeds: int = 20,
    gamma: float = 0.01,
    eta0: float = 1.0,
) -> RegretBenchResult:
    """Regret at each grid horizon, one independent episode per (T, seed).

    Each horizon gets its own episodes because the fixed-horizon learning
    rate depends on T; prefixes of a single long run would be mis-tuned.
    """
    if seeds < 1:
        raise ValueError(f"seeds must be >= 1, got {seeds}")
    grid = horizon_grid(horizon)
    result = RegretBenchResult(n, k, loss_model, grid)
    for t in grid:
        result.per_seed[t] = [
            regret_run(n, k, t, loss_model, seed, gamma, eta0) for seed in range(seeds)
        ]
    return result


@dataclass
class MarginalsBenchResult:
    ns: list[int]
    ks: list[int]
    per_seed: dict[int, list[float]] = field(default_factory=dict)

    def median(self, n: int) -> float:
        return float(np.median(self.per_seed[n]))

    @property
    def medians(self) -> list[float]:
        return [self.median(n) for n in self.ns]

    def rows(self) -> list[dict]:
        out = []
        for n, k in zip(self.ns, self.ks):
            for seed, value in enumerate(self.per_seed[n]):
                out.append({"N": n, "k": k, "seed": seed, "tv": value})
        return out


def marginals_bench(
    n_grid: list[int],
    seeds: int = 50,
    k: int | None = None,
    k_frac: float = 0.1,
    sigma: float = 1.0,
) -> MarginalsBenchResult:
    """TV(exact, approx) per ground-set size over random log-normal weights.

    ``k`` fixes the subset size for every n; otherwise k = max(1,
    round(k_frac * n)). Exact marginals are only computed up to
    ``EXACT_FEASIBLE_MAX`` items; larger entries are rejected.
    """
    if not n_grid:
        raise ValueError("n_grid must be non-empty")
    if seeds < 1:
        raise ValueError(f"seeds must be >= 1, got {seeds}")
    ns = sorted(set(int(n) for n in n_grid))
    ks = []
    for n in ns:
        if n > EXACT_FEASIBLE_MAX:
            raise ValueError(
                f"exact marginals infeasible for N={n} (cap {EXACT_FEASIBLE_MAX})"
            )
        kn = k if k is not None else max(1, round(k_frac * n))
        if not (1 <= kn <= n):
            raise ValueError(f"k={kn} out of range for N={n}")
        if kn == n:
            raise ValueError(f"k={kn} saturates N={n}; approximation undefined")
        ks.append(kn)
    result = MarginalsBenchResult(ns, ks)
    for n, kn in zip(ns, ks):
        tvs = []
        for seed in range(seeds):
            rng = np.random.default_rng(seed + 1000 * n)
            log_w = rng.normal(0.0, sigma, n)
            tvs.append(tv_distance(exact_marginals(log_w, kn), approx_marginals(log_w, kn)))
        result.per_seed[n] = tvs
    return result
