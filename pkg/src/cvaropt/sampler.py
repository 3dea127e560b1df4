"""Bandit sampler over k-DPP marginals for adaptive tail sampling.

The sampler maintains log-domain item weights. Each round it exposes the
mixed singleton distribution

    q = (1 - gamma) * P(w) / k + gamma / n,

where P(w) are the k-DPP inclusion marginals of the current weights, draws
an index through a sum tree, and after seeing the (importance-weighted)
loss of the drawn index performs a multiplicative update

    log w_i += eta_t * loss / q_i      (clipped at +80 per step).

With k = 1 this is EXP.3; with k = n the distribution stays uniform and
the sampler is inert.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .kdpp import marginals
from .risk import RiskLevel, topk_mean
from .sumtree import SumTree

__all__ = [
    "EtaSchedule",
    "LossEstimate",
    "KdppSampler",
    "eta_at",
    "uniform_index",
    "sampler_regret",
]

logger = logging.getLogger(__name__)

# Per-step cap on the multiplicative update exponent. Keeps a single
# unlucky draw (tiny q) from saturating the weight vector.
CLIP_EXPONENT = 80.0

# Shift all log-weights down once the max exceeds this; marginals are
# scale-free so the distribution is unchanged.
RESCALE_AT = 250.0

_SCHEDULES = ("constant", "fixed-horizon", "inverse-sqrt", "adaptive")


@dataclass(frozen=True)
class EtaSchedule:
    """Sampler step-size rule.

    kinds: ``constant`` (eta0), ``fixed-horizon`` (sqrt(log n / (n T))),
    ``inverse-sqrt`` (eta0 / sqrt(t)), ``adaptive``
    (eta0 / sqrt(1 + accumulated squared estimates at the drawn index)).
    """

    kind: str
    eta0: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _SCHEDULES:
            raise ValueError(f"unknown schedule {self.kind!r}, expected one of {_SCHEDULES}")
        if not (self.eta0 > 0.0 and math.isfinite(self.eta0)):
            raise ValueError(f"eta0 must be positive and finite, got {self.eta0}")


def eta_at(
    schedule: EtaSchedule,
    t: int,
    n: int,
    horizon: int | None = None,
    accum: float = 0.0,
) -> float:
    """Step size at round t >= 1."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if schedule.kind == "constant":
        return schedule.eta0
    if schedule.kind == "fixed-horizon":
        if horizon is None or horizon < 1:
            raise ValueError("fixed-horizon schedule needs a horizon >= 1")
        return schedule.eta0 * math.sqrt(math.log(n) / (n * horizon))
    if schedule.kind == "inverse-sqrt":
        return schedule.eta0 / math.sqrt(t)
    return schedule.eta0 / math.sqrt(1.0 + accum)


@dataclass(frozen=True)
class LossEstimate:
    """Feedback for one draw: the drawn index, its loss in [0, 1], and the
    probability the sampler assigned to that index when drawing."""

    index: int
    raw_loss: float
    q_at_index: float


def uniform_index(u: float, n: int) -> int:
    """Map u in [0, 1) to an index under the uniform distribution."""
    if not (0.0 <= u < 1.0):
        raise ValueError(f"u must lie in [0, 1), got {u}")
    return min(int(u * n), n - 1)


class KdppSampler:
    """Adaptive index sampler playing the adversary in the CVaR game."""

    def __init__(
        self,
        level: RiskLevel,
        schedule: EtaSchedule | None = None,
        gamma: float = 0.01,
        horizon: int | None = None,
    ) -> None:
        if not (0.0 <= gamma < 1.0):
            raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
        self.n = level.n
        self.k = level.k
        self.level = level
        self.schedule = schedule or EtaSchedule("constant", 1.0)
        self.gamma = gamma
        self.horizon = horizon
        self.log_w = np.zeros(self.n)
        self.grad_sq_accum = np.zeros(self.n)
        self.t = 0
        self.clip_events = 0
        # k == n admits a single subset, so q is uniform at every round.
        self._uniform_forever = self.k == self.n
        self._q: np.ndarray | None = None
        self._tree: SumTree | None = None

    def distribution(self) -> np.ndarray:
        """Current mixed singleton distribution q (sums to 1)."""
        if self._q is None:
            if self._uniform_forever:
                p_over_k = np.full(self.n, 1.0 / self.n)
            else:
                p_over_k = marginals(self.log_w, self.k).p / self.k
            q = (1.0 - self.gamma) * p_over_k + self.gamma / self.n
            self._q = q
            if not self._uniform_forever:
                self._tree = SumTree(q)
        return self._q.copy()

    def draw(self, u: float) -> int:
        """Sample an index from q using the uniform variate u."""
        self.distribution()
        if self._uniform_forever:
            return uniform_index(u, self.n)
        assert self._tree is not None
        return self._tree.sample(u)

    def q_at(self, index: int) -> float:
        self.distribution()
        assert self._q is not None
        return float(self._q[index])

    def update(self, est: LossEstimate) -> None:
        """Multiplicative weight update from one importance-weighted loss."""
        if not (0 <= est.index < self.n):
            raise IndexError(f"index {est.index} out of range for n={self.n}")
        if not (0.0 <= est.raw_loss <= 1.0):
            raise ValueError(f"loss must lie in [0, 1], got {est.raw_loss}")
        if not (est.q_at_index > 0.0):
            raise ValueError(f"q_at_index must be positive, got {est.q_at_index}")
        self.t += 1
        iw = est.raw_loss / est.q_at_index
        self.grad_sq_accum[est.index] += iw * iw
        eta = eta_at(
            self.schedule,
            self.t,
            self.n,
            horizon=self.horizon,
            accum=self.grad_sq_accum[est.index],
        )
        exponent = eta * iw
        if exponent > CLIP_EXPONENT:
            self.clip_events += 1
            logger.debug(
                "clipped sampler exponent %.3g -> %.3g at t=%d index=%d",
                exponent, CLIP_EXPONENT, self.t, est.index,
            )
            exponent = CLIP_EXPONENT
        self.log_w[est.index] += exponent
        m = self.log_w.max()
        if m > RESCALE_AT:
            self.log_w -= m
        self._q = None
        self._tree = None


def sampler_regret(loss_history: np.ndarray, q_history: np.ndarray, level: RiskLevel) -> float:
    """Regret against the best fixed distribution on the capped simplex.

    The comparator term max_q sum_t q . L_t is a linear program over the
    capped simplex whose optimum sits at a vertex: 1/k on each of the k
    largest *cumulative* per-index losses. Returns that optimum minus the
    mass actually earned, sum_t q_t . L_t.
    """
    L = np.asarray(loss_history, dtype=np.float64)
    Q = np.asarray(q_history, dtype=np.float64)
    if L.ndim != 2 or Q.shape != L.shape:
        raise ValueError(f"need matching (T, n) histories, got {L.shape} and {Q.shape}")
    if L.shape[1] != level.n:
        raise ValueError(f"history has n={L.shape[1]}, level built for n={level.n}")
    cumulative = L.sum(axis=0)
    comparator = topk_mean(cumulative, level.k)
    earned = float((Q * L).sum())
    return comparator - earned
