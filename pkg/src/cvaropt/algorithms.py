"""The four training loops (ada-cvar, trunc-cvar, soft-cvar, mean), output
selection, and game-regret instrumentation.

All four loops share one engine: seeded rng, parameter init, loss-scale
calibration, per-epoch metric records, running-average iterate, optional
best-validation checkpoint. They differ only in how a mini-batch is drawn
and how its gradient is aggregated:

* ``mean``        uniform batch, average gradient.
* ``ada-cvar``    batch drawn from the bandit sampler's distribution q_t
                  over k-DPP marginals; each draw feeds an importance-
                  weighted loss back to the sampler; the learner takes the
                  plain average gradient (no importance correction).
* ``trunc-cvar``  uniform batch, subgradients of
                  ell + (1/(alpha b)) sum_i max(0, L_i - ell).
* ``soft-cvar``   uniform batch, exact gradients of the smooth surrogate
                  ell + (tau/alpha) log((1/b) sum_i exp((L_i - ell)/tau)).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .learners import (
    LossSpec,
    ModelParams,
    Optimizer,
    calibrate_scale,
    init_params,
    loss_coeffs,
    loss_values,
    optimizer_step,
)
from .risk import RiskLevel, topk_mean
from .sampler import EtaSchedule, KdppSampler, LossEstimate, uniform_index

__all__ = [
    "TrainConfig",
    "RunTrace",
    "NumericOverflowError",
    "train_ada_cvar",
    "train_trunc_cvar",
    "train_soft_cvar",
    "train_mean",
    "train",
    "select_output",
    "game_regret",
    "cvar_oracle",
    "trunc_objective",
    "soft_objective",
    "model_metrics",
]

ALGORITHMS = ("ada-cvar", "trunc-cvar", "soft-cvar", "mean")
_SELECTIONS = ("last", "average", "uniform-random")
_ORDERINGS = ("sampler-first", "learner-first")


class NumericOverflowError(RuntimeError):
    """Parameters left the float range during training."""

    def __init__(self, step: int) -> None:
        super().__init__(f"non-finite parameters at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    algorithm: str
    alpha: float
    steps: int
    batch_size: int = 64
    lr: float = 0.1
    optimizer: str = "plain-sgd"
    momentum: float = 0.9
    schedule: EtaSchedule = field(default_factory=lambda: EtaSchedule("fixed-horizon"))
    gamma: float = 0.01
    soft_tau: float = 1.0
    lr_ell: float | None = None
    seed: int = 0
    iterate_selection: str = "last"
    ordering: str = "sampler-first"
    projection_radius: float | None = None
    early_stop: bool = False
    instrument_full_losses: bool = False
    store_iterates: bool = False
    eval_every: int | None = None
    loss_kind: str | None = None
    loss_scale: float | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.algorithm == "soft-cvar" and not (self.soft_tau > 0.0):
            raise ValueError(f"soft_tau must be positive, got {self.soft_tau}")
        if self.iterate_selection not in _SELECTIONS:
            raise ValueError(
                f"unknown iterate_selection {self.iterate_selection!r}, "
                f"expected one of {_SELECTIONS}"
            )
        if self.ordering not in _ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}, expected one of {_ORDERINGS}")


@dataclass
class RunTrace:
    """Everything a run leaves behind besides its final parameters."""

    config: TrainConfig
    scale: float
    steps_run: int = 0
    records: list[dict] = field(default_factory=list)
    step_indices: list[np.ndarray] = field(default_factory=list)
    step_q: list[np.ndarray] = field(default_factory=list)
    step_losses: list[np.ndarray] = field(default_factory=list)
    ell_history: list[float] = field(default_factory=list)
    zero_grad_steps: int = 0
    clip_events: int = 0
    initial_params: ModelParams | None = None
    final_params: ModelParams | None = None
    avg_params: ModelParams | None = None
    iterates: list[ModelParams] = field(default_factory=list)
    best_val_cvar: float = math.inf
    best_val_params: ModelParams | None = None
    full_losses: list[np.ndarray] = field(default_factory=list)
    full_q: list[np.ndarray] = field(default_factory=list)
    wall_clock_s: float = 0.0


def trunc_objective(losses: np.ndarray, ell: float, alpha: float) -> float:
    """ell + (1/(alpha b)) sum_i max(0, L_i - ell) over a batch."""
    losses = np.asarray(losses, dtype=np.float64)
    return float(ell + np.maximum(losses - ell, 0.0).mean() / alpha)


def soft_objective(losses: np.ndarray, ell: float, alpha: float, tau: float) -> float:
    """ell + (tau/alpha) log((1/b) sum_i exp((L_i - ell)/tau)), max-shifted."""
    losses = np.asarray(losses, dtype=np.float64)
    x = (losses - ell) / tau
    m = float(x.max())
    lse = m + math.log(np.exp(x - m).sum() / losses.size)
    return float(ell + tau * lse / alpha)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()


def model_metrics(params: ModelParams, ds: Dataset, spec: LossSpec, alpha: float) -> dict:
    """Mean loss, CVaR@alpha, and classification quality on one split."""
    losses = loss_values(params, ds.features, ds.targets.astype(np.float64), spec)
    k = max(1, int(math.floor(alpha * losses.size + 1e-9)))
    out = {
        "mean_loss": float(losses.mean()),
        "cvar": topk_mean(losses, k),
    }
    if ds.task == "classification":
        pred = np.sign(ds.features @ params.theta + params.bias)
        pred[pred == 0.0] = 1.0
        y = ds.targets.astype(np.float64)
        out["accuracy"] = float((pred == y).mean())
        precisions = []
        for label in (-1.0, 1.0):
            hits = pred == label
            precisions.append(float((y[hits] == label).mean()) if hits.any() else 0.0)
        out["min_class_precision"] = min(precisions)
    return out


def _record_epoch(
    trace: RunTrace,
    step: int,
    params: ModelParams,
    spec: LossSpec,
    alpha: float,
    data: Dataset,
    eval_sets: dict[str, Dataset],
) -> None:
    rec: dict = {"step": step, "epoch": len(trace.records)}
    splits = {"train": data, **eval_sets}
    for name, ds in splits.items():
        for key, val in model_metrics(params, ds, spec, alpha).items():
            rec[f"{name}_{key}"] = val
    trace.records.append(rec)
    val = eval_sets.get("val")
    if val is not None and rec["val_cvar"] < trace.best_val_cvar:
        trace.best_val_cvar = rec["val_cvar"]
        trace.best_val_params = params.copy()


@np.errstate(over="ignore", invalid="ignore")
def train(
    data: Dataset,
    config: TrainConfig,
    eval_sets: dict[str, Dataset] | None = None,
) -> tuple[ModelParams, RunTrace]:
    """Run the configured algorithm; returns (final params, trace).

    Intermediate inf/nan arithmetic is silenced: parameter overflow is
    detected explicitly each step and raised as NumericOverflowError.
    """
    t0 = time.perf_counter()
    eval_sets = dict(eval_sets or {})
    X = data.features
    y = data.targets.astype(np.float64)
    n, d = X.shape
    rng = np.random.default_rng(config.seed)
    params = init_params(d, rng)
    loss_kind = config.loss_kind or (
        "logistic-normalized" if data.task == "classification" else "squared-normalized"
    )
    scale = config.loss_scale or calibrate_scale(params, X, y, loss_kind)
    spec = LossSpec(loss_kind, scale)
    opt = Optimizer(config.optimizer, config.lr, config.momentum, config.projection_radius)
    lr_ell = config.lr_ell if config.lr_ell is not None else config.lr
    eval_every = config.eval_every or max(1, math.ceil(n / config.batch_size))

    trace = RunTrace(config=config, scale=scale)
    trace.initial_params = params.copy()

    sampler: KdppSampler | None = None
    if config.algorithm == "ada-cvar":
        level = RiskLevel(config.alpha, n)
        sampler = KdppSampler(level, config.schedule, config.gamma, horizon=max(config.steps, 1))
    ell = 0.5

    theta_sum = np.zeros(d)
    bias_sum = 0.0
    b = config.batch_size

    _record_epoch(trace, 0, params, spec, config.alpha, data, eval_sets)

    for t in range(1, config.steps + 1):
        us = rng.random(b)
        if sampler is not None:
            q = sampler.distribution()
            idx = np.fromiter((sampler.draw(u) for u in us), dtype=np.int64, count=b)
        else:
            q = None
            idx = np.fromiter((uniform_index(u, n) for u in us), dtype=np.int64, count=b)
        Xb, yb = X[idx], y[idx]

        if config.instrument_full_losses:
            # Round-t play: parameters before this step's update and the
            # distribution the indices were actually drawn from.
            trace.full_losses.append(loss_values(params, X, y, spec))
            trace.full_q.append(q.copy() if q is not None else np.full(n, 1.0 / n))

        if config.algorithm == "ada-cvar":
            assert sampler is not None and q is not None
            if config.ordering == "learner-first":
                # Algorithm-1 order: learner moves on the current batch,
                # the sampler then sees the losses at the *new* parameters.
                losses, coeff = loss_coeffs(params, Xb, yb, spec)
                grad = Xb.T @ coeff / b
                grad_bias = float(coeff.mean())
                optimizer_step(opt, params, grad, grad_bias)
                fed = loss_values(params, Xb, yb, spec)
            else:
                losses, coeff = loss_coeffs(params, Xb, yb, spec)
                fed = losses
                grad = Xb.T @ coeff / b
                grad_bias = float(coeff.mean())
            for j in range(b):
                sampler.update(LossEstimate(int(idx[j]), float(fed[j]), float(q[idx[j]])))
            if config.ordering == "sampler-first":
                optimizer_step(opt, params, grad, grad_bias)
            q_at = q[idx]
        elif config.algorithm == "mean":
            losses, coeff = loss_coeffs(params, Xb, yb, spec)
            grad = Xb.T @ coeff / b
            grad_bias = float(coeff.mean())
            optimizer_step(opt, params, grad, grad_bias)
            q_at = np.full(b, 1.0 / n)
        elif config.algorithm == "trunc-cvar":
            losses, coeff = loss_coeffs(params, Xb, yb, spec)
            active = losses > ell
            w = np.where(active, coeff, 0.0)
            grad = Xb.T @ w / (config.alpha * b)
            grad_bias = float(w.sum() / (config.alpha * b))
            grad_ell = 1.0 - float(active.sum()) / (config.alpha * b)
            optimizer_step(opt, params, grad, grad_bias)
            ell = min(max(ell - lr_ell * grad_ell, 0.0), 1.0)
            q_at = np.full(b, 1.0 / n)
        else:  # soft-cvar
            losses, coeff = loss_coeffs(params, Xb, yb, spec)
            s = _softmax((losses - ell) / config.soft_tau)
            w = s * coeff
            grad = Xb.T @ w / config.alpha
            grad_bias = float(w.sum() / config.alpha)
            grad_ell = 1.0 - 1.0 / config.alpha
            optimizer_step(opt, params, grad, grad_bias)
            ell = min(max(ell - lr_ell * grad_ell, 0.0), 1.0)
            q_at = np.full(b, 1.0 / n)

        if not params.is_finite():
            raise NumericOverflowError(t)

        trace.steps_run = t
        trace.step_indices.append(idx)
        trace.step_q.append(np.asarray(q_at, dtype=np.float64))
        trace.step_losses.append(np.asarray(losses, dtype=np.float64))
        if config.algorithm in ("trunc-cvar", "soft-cvar"):
            trace.ell_history.append(ell)
        if not np.any(grad) and grad_bias == 0.0:
            trace.zero_grad_steps += 1
        theta_sum += params.theta
        bias_sum += params.bias
        if config.store_iterates or config.iterate_selection == "uniform-random":
            trace.iterates.append(params.copy())
        if t % eval_every == 0 or t == config.steps:
            _record_epoch(trace, t, params, spec, config.alpha, data, eval_sets)

    if config.steps > 0:
        trace.avg_params = ModelParams(theta_sum / config.steps, bias_sum / config.steps)
    else:
        trace.avg_params = params.copy()
    trace.final_params = params.copy()
    if sampler is not None:
        trace.clip_events = sampler.clip_events
    trace.wall_clock_s = time.perf_counter() - t0

    if config.early_stop and trace.best_val_params is not None:
        return trace.best_val_params.copy(), trace
    return params, trace


def _train_as(algorithm: str, data: Dataset, config: TrainConfig, eval_sets=None):
    if config.algorithm != algorithm:
        config = replace(config, algorithm=algorithm)
    return train(data, config, eval_sets)


def train_ada_cvar(data: Dataset, config: TrainConfig, eval_sets=None):
    return _train_as("ada-cvar", data, config, eval_sets)


def train_trunc_cvar(data: Dataset, config: TrainConfig, eval_sets=None):
    return _train_as("trunc-cvar", data, config, eval_sets)


def train_soft_cvar(data: Dataset, config: TrainConfig, eval_sets=None):
    return _train_as("soft-cvar", data, config, eval_sets)


def train_mean(data: Dataset, config: TrainConfig, eval_sets=None):
    return _train_as("mean", data, config, eval_sets)


def select_output(trace: RunTrace, mode: str, rng: np.random.Generator | None = None) -> ModelParams:
    """Pick the output iterate: last, running average, or uniform-random."""
    if trace.final_params is None:
        raise ValueError("trace is empty: no training steps were recorded")
    if mode == "last":
        return trace.final_params.copy()
    if mode == "average":
        assert trace.avg_params is not None
        return trace.avg_params.copy()
    if mode == "uniform-random":
        if not trace.iterates:
            if trace.steps_run == 0:
                return trace.final_params.copy()
            raise ValueError("uniform-random selection needs stored iterates")
        if rng is None:
            raise ValueError("uniform-random selection needs an rng")
        return trace.iterates[int(rng.integers(len(trace.iterates)))].copy()
    raise ValueError(f"unknown selection mode {mode!r}")


def cvar_oracle(
    data: Dataset,
    level: RiskLevel,
    spec: LossSpec,
    steps: int = 5000,
    lr0: float = 0.5,
    seed: int = 0,
) -> tuple[ModelParams, float]:
    """Long full-batch subgradient run on the truncated objective.

    Used as the theta* reference for game-regret accounting on small
    convex instances. Returns the best iterate by full objective value.
    """
    X = data.features
    y = data.targets.astype(np.float64)
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], rng)
    ell = 0.5
    best_val = math.inf
    best = (params.copy(), ell)
    alpha = level.alpha
    n = X.shape[0]
    for t in range(1, steps + 1):
        losses, coeff = loss_coeffs(params, X, y, spec)
        value = trunc_objective(losses, ell, alpha)
        if value < best_val:
            best_val = value
            best = (params.copy(), ell)
        active = losses > ell
        w = np.where(active, coeff, 0.0)
        grad = X.T @ w / (alpha * n)
        grad_bias = float(w.sum() / (alpha * n))
        grad_ell = 1.0 - float(active.sum()) / (alpha * n)
        lr = lr0 / math.sqrt(t)
        params.theta -= lr * grad
        params.bias -= lr * grad_bias
        ell = min(max(ell - lr * grad_ell, 0.0), 1.0)
    return best


def game_regret(
    trace: RunTrace, data: Dataset, level: RiskLevel, theta_star: ModelParams
) -> float:
    """sum_t [top-k average of L(theta_t)] - sum_t q_t . L(theta*).

    Needs a run instrumented with full per-step loss vectors; the first
    term is the exact inner maximization over the capped simplex at each
    step, the second evaluates the oracle parameters against the played
    sampling distributions.
    """
    if not trace.full_losses:
        raise ValueError(
            "trace lacks full loss vectors; rerun with instrument_full_losses=True"
        )
    spec = LossSpec(
        trace.config.loss_kind
        or ("logistic-normalized" if data.task == "classification" else "squared-normalized"),
        trace.scale,
    )
    star_losses = loss_values(theta_star, data.features, data.targets.astype(np.float64), spec)
    total = 0.0
    for L_t, q_t in zip(trace.full_losses, trace.full_q):
        total += topk_mean(L_t, level.k) - float(q_t @ star_losses)
    return total
