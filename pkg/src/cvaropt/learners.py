"""Linear models with [0,1]-normalized losses and first-order optimizers.

Two loss families, both mapped into [0, 1] by dividing the raw loss by a
per-dataset ``scale`` and clamping at 1:

* ``squared-normalized``   clamp((pred - y)^2 / scale, 0, 1)
* ``logistic-normalized``  clamp(log(1 + exp(-y * pred)) / scale, 0, 1),
  with labels y in {-1, +1}.

Gradients are those of the pre-clamp expression inside the active region
and exactly zero where the clamp binds. The squared loss treats the
boundary raw == scale as clamped (gradient 0); the logistic loss keeps
its gradient at the boundary — both are true subgradients of the clamped
function, and the logistic choice keeps training alive when the scale is
calibrated from an initial model whose losses are all equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "LossSpec",
    "Optimizer",
    "init_params",
    "predict",
    "loss_values",
    "loss_coeffs",
    "loss_and_grad",
    "finite_diff_grad",
    "calibrate_scale",
    "optimizer_step",
]

_LOSS_KINDS = ("squared-normalized", "logistic-normalized")
_OPT_KINDS = ("plain-sgd", "momentum-sgd", "adaptive-moment")

# adaptive-moment hyperparameters (first moment, second moment, fuzz)
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass
class ModelParams:
    """Linear model: prediction = theta . x + bias."""

    theta: np.ndarray
    bias: float = 0.0

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 1:
            raise ValueError("theta must be a 1-d vector")

    @property
    def d(self) -> int:
        return self.theta.size

    def copy(self) -> "ModelParams":
        return ModelParams(self.theta.copy(), self.bias)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.theta)) and np.isfinite(self.bias))


def init_params(d: int, rng: np.random.Generator | None = None, std: float = 0.1) -> ModelParams:
    """Small seeded Gaussian initialization (bias starts at 0)."""
    if rng is None:
        return ModelParams(np.zeros(d), 0.0)
    return ModelParams(std * rng.standard_normal(d), 0.0)


@dataclass(frozen=True)
class LossSpec:
    kind: str
    scale: float

    def __post_init__(self) -> None:
        if self.kind not in _LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {_LOSS_KINDS}")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


def predict(params: ModelParams, x) -> float | np.ndarray:
    """theta . x + bias for a single feature vector or an (m, d) batch."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != params.d:
        raise ValueError(f"feature dimension {arr.shape[-1]} != model dimension {params.d}")
    out = arr @ params.theta + params.bias
    return float(out) if arr.ndim == 1 else out


def _check_labels(y: np.ndarray) -> None:
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("logistic loss needs labels in {-1, +1}")


def _raw_losses(pred: np.ndarray, y: np.ndarray, spec: LossSpec) -> np.ndarray:
    if spec.kind == "squared-normalized":
        return (pred - y) ** 2
    _check_labels(y)
    return np.logaddexp(0.0, -y * pred)


def loss_values(params: ModelParams, X, y, spec: LossSpec) -> np.ndarray:
    """Normalized clamped losses for a batch, each in [0, 1]."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    pred = X @ params.theta + params.bias
    raw = _raw_losses(pred, y, spec)
    return np.minimum(raw / spec.scale, 1.0)


def loss_coeffs(params: ModelParams, X, y, spec: LossSpec) -> tuple[np.ndarray, np.ndarray]:
    """Losses plus d(loss)/d(pred) per example (zero where the clamp binds).

    The per-example parameter gradient is coeff_i * x_i (and coeff_i for
    the bias), so weighted batch gradients reduce to one matrix product.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    pred = X @ params.theta + params.bias
    raw = _raw_losses(pred, y, spec)
    losses = np.minimum(raw / spec.scale, 1.0)
    if spec.kind == "squared-normalized":
        active = raw < spec.scale
        coeff = np.where(active, 2.0 * (pred - y), 0.0) / spec.scale
    else:
        active = raw <= spec.scale
        z = y * pred
        # sigmoid(-z), stable on both tails
        sig = np.empty_like(z)
        pos = z >= 0
        sig[pos] = np.exp(-z[pos]) / (1.0 + np.exp(-z[pos]))
        sig[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
        coeff = np.where(active, -y * sig, 0.0) / spec.scale
    return losses, coeff


def loss_and_grad(params: ModelParams, x, y, spec: LossSpec) -> tuple[float, np.ndarray, float]:
    """Single-example loss, parameter gradient, and bias gradient."""
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    losses, coeff = loss_coeffs(params, X, np.asarray([y], dtype=np.float64), spec)
    return float(losses[0]), coeff[0] * X[0], float(coeff[0])


def finite_diff_grad(
    params: ModelParams, x, y, spec: LossSpec, h: float = 1e-5
) -> tuple[np.ndarray, float]:
    """Central-difference gradient of the (clamped) loss, per coordinate."""
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")

    def value(p: ModelParams) -> float:
        return float(loss_values(p, x, np.asarray([y]), spec)[0])

    grad = np.zeros(params.d)
    for j in range(params.d):
        up, dn = params.copy(), params.copy()
        up.theta[j] += h
        dn.theta[j] -= h
        grad[j] = (value(up) - value(dn)) / (2.0 * h)
    up, dn = params.copy(), params.copy()
    up.bias += h
    dn.bias -= h
    grad_bias = (value(up) - value(dn)) / (2.0 * h)
    return grad, grad_bias


def calibrate_scale(
    params: ModelParams, X, y, kind: str, percentile: float = 99.5
) -> float:
    """Loss scale: the given percentile of the initial model's raw losses."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    pred = X @ params.theta + params.bias
    raw = _raw_losses(pred, y, LossSpec(kind, 1.0))
    return max(float(np.percentile(raw, percentile)), 1e-12)


@dataclass
class Optimizer:
    """First-order update rule with optional L2-ball projection of theta."""

    kind: str
    lr: float
    momentum: float = 0.9
    projection_radius: float | None = None
    step: int = 0
    _vel: np.ndarray | None = field(default=None, repr=False)
    _vel_b: float = field(default=0.0, repr=False)
    _m1: np.ndarray | None = field(default=None, repr=False)
    _m2: np.ndarray | None = field(default=None, repr=False)
    _m1_b: float = field(default=0.0, repr=False)
    _m2_b: float = field(default=0.0, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in _OPT_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}, expected one of {_OPT_KINDS}")
        if not (self.lr >= 0.0 and np.isfinite(self.lr)):
            raise ValueError(f"lr must be >= 0 and finite, got {self.lr}")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")


def optimizer_step(opt: Optimizer, params: ModelParams, grad, grad_bias: float) -> None:
    """One in-place descent step on (theta, bias)."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.theta.shape:
        raise ValueError(f"gradient shape {g.shape} != theta shape {params.theta.shape}")
    opt.step += 1
    if opt.kind == "plain-sgd":
        params.theta -= opt.lr * g
        params.bias -= opt.lr * grad_bias
    elif opt.kind == "momentum-sgd":
        if opt._vel is None:
            opt._vel = np.zeros_like(params.theta)
        opt._vel = opt.momentum * opt._vel + g
        opt._vel_b = opt.momentum * opt._vel_b + grad_bias
        params.theta -= opt.lr * opt._vel
        params.bias -= opt.lr * opt._vel_b
    else:  # adaptive-moment
        if opt._m1 is None:
            opt._m1 = np.zeros_like(params.theta)
            opt._m2 = np.zeros_like(params.theta)
        opt._m1 = _ADAM_BETA1 * opt._m1 + (1.0 - _ADAM_BETA1) * g
        opt._m2 = _ADAM_BETA2 * opt._m2 + (1.0 - _ADAM_BETA2) * g * g
        opt._m1_b = _ADAM_BETA1 * opt._m1_b + (1.0 - _ADAM_BETA1) * grad_bias
        opt._m2_b = _ADAM_BETA2 * opt._m2_b + (1.0 - _ADAM_BETA2) * grad_bias**2
        c1 = 1.0 - _ADAM_BETA1**opt.step
        c2 = 1.0 - _ADAM_BETA2**opt.step
        params.theta -= opt.lr * (opt._m1 / c1) / (np.sqrt(opt._m2 / c2) + _ADAM_EPS)
        params.bias -= opt.lr * (opt._m1_b / c1) / (np.sqrt(opt._m2_b / c2) + _ADAM_EPS)
    if opt.projection_radius is not None:
        norm = float(np.linalg.norm(params.theta))
        if norm > opt.projection_radius:
            params.theta *= opt.projection_radius / norm
