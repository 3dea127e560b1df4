"""Dataset ingestion, synthetic generators, preprocessing, splits, and
class-imbalance shift transforms."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "ShiftSpec",
    "CsvParseError",
    "gen_synthetic",
    "load_csv",
    "write_csv",
    "standardize",
    "split",
    "apply_shift",
]

SYNTHETIC_NAMES = ("normal", "pareto", "sinc", "two-gaussians")
PARETO_SHAPE = 2.5


class CsvParseError(ValueError):
    """CSV structure problem, with 1-based row/column location when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None) -> None:
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str]
    task: str  # "regression" | "classification"
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a non-empty 2-d matrix, got {self.features.shape}")
        if self.targets.shape != (self.features.shape[0],):
            raise ValueError("targets length must match the number of rows")
        if not np.all(np.isfinite(self.features)) or not np.all(
            np.isfinite(self.targets.astype(np.float64))
        ):
            raise ValueError("dataset contains non-finite entries")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length must match the number of columns")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx].copy(),
            self.targets[idx].copy(),
            list(self.feature_names),
            self.task,
            self.name,
            dict(self.meta),
        )


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.5, 0.3, 0.2)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ValueError("fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")


@dataclass(frozen=True)
class ShiftSpec:
    kind: str = "none"  # none | binary-imbalance-invert | power-law
    ratio: float = 0.1
    beta: float = 1.0
    target: str = "train"  # train | test | both
    rebalance: str = "none"  # none | upsample | downsample

    def __post_init__(self) -> None:
        if self.kind not in ("none", "binary-imbalance-invert", "power-law"):
            raise ValueError(f"unknown shift kind {self.kind!r}")
        if self.kind == "binary-imbalance-invert" and not (0.0 < self.ratio <= 0.5):
            raise ValueError(f"ratio must lie in (0, 0.5], got {self.ratio}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.target not in ("train", "test", "both"):
            raise ValueError(f"unknown shift target {self.target!r}")
        if self.rebalance not in ("none", "upsample", "downsample"):
            raise ValueError(f"unknown rebalance mode {self.rebalance!r}")


def gen_synthetic(
    name: str,
    n: int,
    d: int = 10,
    noise: float = 0.5,
    seed: int = 0,
    sep: float = 2.0,
) -> Dataset:
    """Synthetic datasets.

    normal / pareto: y = theta_true . x with x ~ N(0, I_d) plus additive
    noise — Gaussian(0, noise) or shape-2.5 Pareto rescaled by ``noise``
    and shifted to zero mean. sinc: 1-d x ~ U[-5, 5],
    y = sin(pi x)/(pi x) + Gaussian noise. two-gaussians: balanced binary
    labels, class-conditional Gaussians with mean separation ``sep``.
    theta_true (regression) is drawn from the same seed and recorded in
    ``meta``.
    """
    if name not in SYNTHETIC_NAMES:
        raise ValueError(f"unknown synthetic dataset {name!r}, expected one of {SYNTHETIC_NAMES}")
    if n < 10:
        raise ValueError(f"n must be >= 10, got {n}")
    if noise < 0.0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    if name in ("normal", "pareto"):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        theta_true = rng.standard_normal(d)
        X = rng.standard_normal((n, d))
        if name == "normal":
            eps = noise * rng.standard_normal(n)
        else:
            # standard Pareto(a) has mean 1/(a-1); shift it out, then rescale
            eps = noise * (rng.pareto(PARETO_SHAPE, n) - 1.0 / (PARETO_SHAPE - 1.0))
        y = X @ theta_true + eps
        names = [f"x{j}" for j in range(d)]
        return Dataset(X, y, names, "regression", name, {"theta_true": theta_true.tolist()})
    if name == "sinc":
        x = rng.uniform(-5.0, 5.0, n)
        y = np.sinc(x) + noise * rng.standard_normal(n)
        return Dataset(x.reshape(-1, 1), y, ["x0"], "regression", name)
    # two-gaussians
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    mu = (sep / 2.0) * np.ones(d) / math.sqrt(d)
    X = rng.standard_normal((n, d)) + labels[:, None] * mu[None, :]
    names = [f"x{j}" for j in range(d)]
    return Dataset(X, labels, names, "classification", name, {"separation": sep})


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path: str | Path, schema: dict | None = None) -> Dataset:
    """Load a comma-separated file: header row, numeric columns, one-hot
    encoding for categoricals.

    Without a schema a column is categorical as soon as one cell fails to
    parse as a float. A schema dict may pin: ``target`` (column name,
    default: last column), ``categorical`` (list of column names — then a
    bad cell in any other column is an error), ``positive_label`` (maps to
    +1 in binary classification), ``task``.
    """
    schema = schema or {}
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise CsvParseError(f"{path} has a header but no data rows", row=1)
    ncol = len(header)
    for r, row in enumerate(body, start=2):
        if len(row) != ncol:
            raise CsvParseError(
                f"expected {ncol} cells, found {len(row)}", row=r
            )

    target_col = schema.get("target", header[-1])
    if target_col not in header:
        raise CsvParseError(f"target column {target_col!r} not in header")
    declared = schema.get("categorical")
    columns: dict[str, list[str]] = {h: [row[j].strip() for row in body] for j, h in enumerate(header)}

    def column_values(name: str) -> tuple[np.ndarray | None, list[str]]:
        """(numeric array or None, raw strings); errors if declared numeric."""
        raw = columns[name]
        parsed = [_parse_float(c) for c in raw]
        bad = next((i for i, v in enumerate(parsed) if v is None), None)
        if bad is None:
            return np.asarray(parsed, dtype=np.float64), raw
        if declared is not None and name not in declared and name != target_col:
            raise CsvParseError(
                f"cell {raw[bad]!r} in declared-numeric column is not a number",
                row=bad + 2,
                column=name,
            )
        return None, raw

    feature_blocks: list[np.ndarray] = []
    feature_names: list[str] = []
    for name in header:
        if name == target_col:
            continue
        numeric, raw = column_values(name)
        if numeric is not None and (declared is None or name not in declared):
            feature_blocks.append(numeric.reshape(-1, 1))
            feature_names.append(name)
        else:
            values = sorted(set(raw))
            onehot = np.zeros((len(raw), len(values)))
            index = {v: j for j, v in enumerate(values)}
            for i, v in enumerate(raw):
                onehot[i, index[v]] = 1.0
            feature_blocks.append(onehot)
            feature_names.extend(f"{name}={v}" for v in values)
    if not feature_blocks:
        raise CsvParseError("no feature columns besides the target")
    X = np.hstack(feature_blocks)

    numeric_target, raw_target = column_values(target_col)
    task = schema.get("task")
    if numeric_target is not None and task != "classification":
        return Dataset(X, numeric_target, feature_names, "regression", path.stem)
    if numeric_target is not None:
        values = sorted(set(numeric_target.tolist()))
        raw_target = [repr(v) for v in numeric_target.tolist()]
        classes = [repr(v) for v in values]
    else:
        classes = sorted(set(raw_target))
    if len(classes) < 2:
        raise CsvParseError(f"classification target has a single value", column=target_col)
    if len(classes) == 2:
        positive = schema.get("positive_label", classes[-1])
        positive = repr(float(positive)) if numeric_target is not None and not isinstance(positive, str) else positive
        if positive not in classes:
            raise CsvParseError(f"positive label {positive!r} not among {classes}", column=target_col)
        y = np.asarray([1.0 if v == positive else -1.0 for v in raw_target])
    else:
        index = {v: j for j, v in enumerate(classes)}
        y = np.asarray([index[v] for v in raw_target], dtype=np.int64)
    ds = Dataset(X, y, feature_names, "classification", path.stem)
    ds.meta["classes"] = classes
    return ds


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset back out as CSV (+ a JSON schema sidecar when the
    task is classification, so a reload round-trips the label mapping)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*ds.feature_names, "target"])
        for x, t in zip(ds.features, ds.targets):
            writer.writerow([*(repr(float(v)) for v in x), repr(float(t))])
    if ds.task == "classification":
        sidecar = {"target": "target", "task": "classification", "positive_label": 1.0}
        with open(f"{path}.schema.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")


def standardize(
    train: Dataset, others: list[Dataset] | tuple[Dataset, ...] = ()
) -> tuple[np.ndarray, np.ndarray]:
    """Center/scale every feature by the train split's mean and std,
    in place on all given splits. Zero-variance features are centered
    only. Returns (mean, scale) so a stored model can replay the same
    transform on new data."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    for ds in (train, *others):
        if ds.d != train.d:
            raise ValueError("splits disagree on feature dimension")
        ds.features -= mean
        ds.features /= scale
    return mean, scale


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle, then partition by the spec fractions."""
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(data.n)
    n_train = int(math.floor(spec.fractions[0] * data.n))
    n_val = int(math.floor(spec.fractions[1] * data.n))
    if n_train < 1 or n_val < 1 or data.n - n_train - n_val < 1:
        raise ValueError(f"split of n={data.n} leaves an empty part")
    parts = (
        data.take(perm[:n_train]),
        data.take(perm[n_train : n_train + n_val]),
        data.take(perm[n_train + n_val :]),
    )
    return parts


def _class_indices(targets: np.ndarray) -> dict:
    return {label: np.flatnonzero(targets == label) for label in np.unique(targets)}


def apply_shift(data: Dataset, spec: ShiftSpec, rng: np.random.Generator) -> Dataset:
    """Class-imbalance transform; returns a new dataset of existing rows.

    binary-imbalance-invert: keep the minority class whole and subsample
    the majority down so it forms the ``ratio`` fraction of the result.
    power-law: classes ranked by size (largest first); class at rank c is
    retained up to round(largest_size * c**log(beta)) examples.
    rebalance: upsample duplicates minority rows (with replacement) until
    all classes match the largest; downsample trims to the smallest.
    """
    if spec.kind == "none" and spec.rebalance == "none":
        return data.take(np.arange(data.n))
    if data.task != "classification":
        raise ValueError("class shifts require a classification dataset")
    keep: list[np.ndarray] = []
    if spec.kind == "binary-imbalance-invert":
        groups = _class_indices(data.targets)
        if len(groups) != 2:
            raise ValueError(f"binary shift needs 2 classes, found {len(groups)}")
        labels = sorted(groups, key=lambda lb: (len(groups[lb]), str(lb)))
        minority, majority = groups[labels[0]], groups[labels[1]]
        new_major = int(round(len(minority) * spec.ratio / (1.0 - spec.ratio)))
        new_major = max(1, min(new_major, len(majority)))
        chosen = rng.choice(majority, size=new_major, replace=False)
        keep = [minority, chosen]
    elif spec.kind == "power-law":
        groups = _class_indices(data.targets)
        ranked = sorted(groups.values(), key=len, reverse=True)
        largest = len(ranked[0])
        for c, idx in enumerate(ranked, start=1):
            quota = int(round(largest * c ** math.log(spec.beta)))
            quota = max(1, min(quota, len(idx)))
            keep.append(rng.choice(idx, size=quota, replace=False) if quota < len(idx) else idx)
    else:
        keep = [np.arange(data.n)]
    indices = np.sort(np.concatenate(keep))
    out = data.take(indices)

    if spec.rebalance != "none":
        groups = _class_indices(out.targets)
        sizes = {lb: len(ix) for lb, ix in groups.items()}
        target_size = max(sizes.values()) if spec.rebalance == "upsample" else min(sizes.values())
        parts = []
        for lb in sorted(groups, key=str):
            idx = groups[lb]
            if spec.rebalance == "upsample" and len(idx) < target_size:
                extra = rng.choice(idx, size=target_size - len(idx), replace=True)
                parts.append(np.concatenate([idx, extra]))
            elif spec.rebalance == "downsample" and len(idx) > target_size:
                parts.append(rng.choice(idx, size=target_size, replace=False))
            else:
                parts.append(idx)
        out = out.take(np.sort(np.concatenate(parts)))
    return out
