"""Command-line experiment front-end.

Subcommands
-----------
train            run one configured training job, emit JSONL records
evaluate         score a saved model on a dataset at one or more alphas
regret-bench     sampler-only regret growth table (+ CSV/PNG)
marginals-bench  exact-vs-approximate marginal TV table (+ CSV/PNG)
gen-data         write a synthetic dataset to CSV
summarize        aggregate final records into normalized scores

Seeding: every stochastic stage draws from its own substream of the
master seed, spawned in the fixed order data, split, shift, train,
select. The master seed resolves as config file < ``CVAROPT_SEED``
environment variable < ``--seed`` flag.

Exit codes: 0 success, 2 configuration error (message names the bad
field), 3 numeric overflow during training (an ``aborted`` record is
written first).
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, records
from .algorithms import (
    ALGORITHMS,
    NumericOverflowError,
    TrainConfig,
    model_metrics,
    select_output,
    train,
)
from .data import (
    Dataset,
    ShiftSpec,
    SplitSpec,
    SYNTHETIC_NAMES,
    apply_shift,
    gen_synthetic,
    load_csv,
    split,
    standardize,
    write_csv,
)
from .learners import LossSpec, ModelParams
from .sampler import EtaSchedule

ENV_SEED = "CVAROPT_SEED"

_SUBSTREAMS = ("data", "split", "shift", "train", "select")


class ConfigError(ValueError):
    """Bad configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        prefix = f"config error at {field}: " if field else "config error: "
        super().__init__(prefix + message)


def _substream_seeds(master: int) -> dict[str, int]:
    children = np.random.SeedSequence(master).spawn(len(_SUBSTREAMS))
    return {
        name: int(child.generate_state(1)[0])
        for name, child in zip(_SUBSTREAMS, children)
    }


_TOP_KEYS = {
    "dataset", "algorithm", "alpha", "batch_size", "steps", "epochs", "lr",
    "optimizer", "sampler", "soft_tau", "seed", "output_dir",
    "iterate_selection", "instrument_full_losses", "gamma", "momentum",
    "lr_ell", "ordering", "projection_radius", "early_stop", "eval_every",
}
_DATASET_KEYS = {"name", "path", "schema", "split", "shift", "n", "d", "noise", "sep"}
_SAMPLER_KEYS = {"schedule", "gamma", "eta0"}
_SHIFT_KEYS = {"kind", "ratio", "beta", "target", "rebalance"}


def _check_keys(cfg: dict, allowed: set, where: str) -> None:
    for key in cfg:
        if key not in allowed:
            raise ConfigError("unknown key", f"{where}{key}")


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "")
    if "dataset" not in cfg:
        raise ConfigError("required", "dataset")
    ds = cfg["dataset"]
    if not isinstance(ds, dict):
        raise ConfigError("must be an object", "dataset")
    _check_keys(ds, _DATASET_KEYS, "dataset.")
    if ("name" in ds) == ("path" in ds):
        raise ConfigError("exactly one of name/path is required", "dataset")
    if "name" in ds and ds["name"] not in SYNTHETIC_NAMES:
        raise ConfigError(
            f"unknown synthetic dataset {ds['name']!r}, expected one of {SYNTHETIC_NAMES}",
            "dataset.name",
        )
    if "shift" in ds:
        if not isinstance(ds["shift"], dict):
            raise ConfigError("must be an object", "dataset.shift")
        _check_keys(ds["shift"], _SHIFT_KEYS, "dataset.shift.")
    if "sampler" in cfg:
        if not isinstance(cfg["sampler"], dict):
            raise ConfigError("must be an object", "sampler")
        _check_keys(cfg["sampler"], _SAMPLER_KEYS, "sampler.")
    if "steps" in cfg and "epochs" in cfg:
        raise ConfigError("give steps or epochs, not both", "steps")
    if "algorithm" in cfg and cfg["algorithm"] not in ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {cfg['algorithm']!r}, expected one of {ALGORITHMS}",
            "algorithm",
        )
    return cfg


def resolve_seed(cfg: dict, flag_seed: int | None) -> int:
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", "seed")
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"{ENV_SEED} must be an integer, got {env!r}", "seed")
    if flag_seed is not None:
        seed = flag_seed
    return seed


def _build_dataset(ds_cfg: dict, data_seed: int) -> Dataset:
    if "name" in ds_cfg:
        return gen_synthetic(
            ds_cfg["name"],
            n=int(ds_cfg.get("n", 2000)),
            d=int(ds_cfg.get("d", 10)),
            noise=float(ds_cfg.get("noise", 0.5)),
            sep=float(ds_cfg.get("sep", 2.0)),
            seed=data_seed,
        )
    schema = None
    if "schema" in ds_cfg:
        with open(ds_cfg["schema"], encoding="utf-8") as fh:
            schema = json.load(fh)
    else:
        sidecar = Path(str(ds_cfg["path"]) + ".schema.json")
        if sidecar.exists():
            with open(sidecar, encoding="utf-8") as fh:
                schema = json.load(fh)
    return load_csv(ds_cfg["path"], schema=schema)


def _schedule_from(cfg: dict) -> EtaSchedule:
    sampler_cfg = cfg.get("sampler", {})
    kind = sampler_cfg.get("schedule", "fixed-horizon")
    eta0 = float(sampler_cfg.get("eta0", 1.0))
    return EtaSchedule(kind, eta0)


def prepare_run(cfg: dict, seed: int):
    """Config dict -> (train/val/test splits, TrainConfig, transform).

    All ValueErrors raised by the underlying constructors surface as
    ConfigError so the CLI exits with code 2.
    """
    subs = _substream_seeds(seed)
    ds_cfg = cfg["dataset"]
    data = _build_dataset(ds_cfg, subs["data"])
    fractions = tuple(ds_cfg.get("split", (0.5, 0.3, 0.2)))
    train_ds, val_ds, test_ds = split(data, SplitSpec(fractions, subs["split"]))
    if "shift" in ds_cfg:
        shift_cfg = dict(ds_cfg["shift"])
        spec = ShiftSpec(
            kind=shift_cfg.get("kind", "none"),
            ratio=float(shift_cfg.get("ratio", 0.1)),
            beta=float(shift_cfg.get("beta", 1.0)),
            target=shift_cfg.get("target", "train"),
            rebalance=shift_cfg.get("rebalance", "none"),
        )
        rng = np.random.default_rng(subs["shift"])
        if spec.target in ("train", "both"):
            train_ds = apply_shift(train_ds, spec, rng)
        if spec.target in ("test", "both"):
            test_ds = apply_shift(test_ds, spec, rng)
    mean, scale = standardize(train_ds, (val_ds, test_ds))

    algorithm = cfg.get("algorithm", "mean")
    alpha = float(cfg.get("alpha", 1.0))
    batch_size = int(cfg.get("batch_size", 64))
    if "epochs" in cfg:
        steps_per_epoch = max(1, math.ceil(train_ds.n / batch_size))
        steps = int(cfg["epochs"]) * steps_per_epoch
    else:
        steps = int(cfg.get("steps", 1000))
    if algorithm != "mean" and math.floor(alpha * train_ds.n + 1e-9) < 1:
        raise ConfigError(
            f"alpha={alpha} keeps no tail item out of {train_ds.n} training rows",
            "alpha",
        )
    sampler_cfg = cfg.get("sampler", {})
    config = TrainConfig(
        algorithm=algorithm,
        alpha=alpha,
        steps=steps,
        batch_size=batch_size,
        lr=float(cfg.get("lr", 0.1)),
        optimizer=cfg.get("optimizer", "plain-sgd"),
        momentum=float(cfg.get("momentum", 0.9)),
        schedule=_schedule_from(cfg),
        gamma=float(sampler_cfg.get("gamma", cfg.get("gamma", 0.01))),
        soft_tau=float(cfg.get("soft_tau", 1.0)),
        lr_ell=cfg.get("lr_ell"),
        seed=subs["train"],
        iterate_selection=cfg.get("iterate_selection", "last"),
        ordering=cfg.get("ordering", "sampler-first"),
        projection_radius=cfg.get("projection_radius"),
        early_stop=bool(cfg.get("early_stop", False)),
        instrument_full_losses=bool(cfg.get("instrument_full_losses", False)),
        eval_every=cfg.get("eval_every"),
    )
    return train_ds, val_ds, test_ds, config, (mean, scale), subs


def _save_model(
    path: Path,
    params: ModelParams,
    spec_kind: str,
    scale: float,
    task: str,
    alpha: float,
    feature_names: list[str],
    transform,
) -> None:
    mean, fscale = transform
    blob = {
        "theta": [float(v) for v in params.theta],
        "bias": float(params.bias),
        "loss_kind": spec_kind,
        "scale": float(scale),
        "task": task,
        "alpha": float(alpha),
        "feature_names": list(feature_names),
        "feature_mean": [float(v) for v in mean],
        "feature_scale": [float(v) for v in fscale],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(cfg, args.seed)
    try:
        train_ds, val_ds, test_ds, config, transform, subs = prepare_run(cfg, seed)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc))

    out_dir = Path(args.output_dir or cfg.get("output_dir", "runs"))
    out_dir.mkdir(parents=True, exist_ok=True)
    hash_cfg = dict(cfg)
    hash_cfg["seed"] = seed
    chash = records.config_hash(hash_cfg)
    run_id = f"{chash}-s{seed}"
    rec_path = out_dir / f"{run_id}.jsonl"
    rec_path.unlink(missing_ok=True)
    dataset_name = cfg["dataset"].get("name") or Path(cfg["dataset"]["path"]).stem

    def stamp(kind: str) -> dict:
        return records.base_record(kind, chash, seed, config.algorithm, dataset_name)

    eval_sets = {"val": val_ds, "test": test_ds}
    try:
        params, trace = train(train_ds, config, eval_sets)
    except NumericOverflowError as exc:
        rec = stamp("aborted")
        rec.update({"step": exc.step, "reason": str(exc)})
        records.append_jsonl(rec_path, rec)
        print(f"aborted: {exc}", file=sys.stderr)
        print(f"records: {rec_path}")
        return 3

    for epoch_rec in trace.records:
        rec = stamp("epoch")
        rec.update(epoch_rec)
        records.append_jsonl(rec_path, rec)

    rng_select = np.random.default_rng(subs["select"])
    chosen = select_output(trace, config.iterate_selection, rng_select)
    spec = LossSpec(
        config.loss_kind
        or ("logistic-normalized" if train_ds.task == "classification" else "squared-normalized"),
        trace.scale,
    )
    final = stamp("final")
    final.update(
        {
            "alpha": config.alpha,
            "steps": trace.steps_run,
            "wall_clock_s": trace.wall_clock_s,
            "clip_events": trace.clip_events,
            "scale": trace.scale,
        }
    )
    for name, ds in (("train", train_ds), ("val", val_ds), ("test", test_ds)):
        for key, val in model_metrics(chosen, ds, spec, config.alpha).items():
            final[f"{name}_{key}"] = val
    if trace.ell_history:
        final["ell_final"] = trace.ell_history[-1]
        final["ell_mean"] = float(np.mean(trace.ell_history))
    records.append_jsonl(rec_path, final)

    model_path = out_dir / f"{run_id}-model.json"
    _save_model(
        model_path, chosen, spec.kind, trace.scale, train_ds.task,
        config.alpha, train_ds.feature_names, transform,
    )
    print(f"records: {rec_path}")
    print(f"model: {model_path}")
    print(
        f"final test mean_loss {final['test_mean_loss']:.10g} "
        f"cvar@{config.alpha:g} {final['test_cvar']:.10g}"
    )
    return 0


def _load_model(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file: {exc}")
    for key in ("theta", "bias", "loss_kind", "scale", "feature_mean", "feature_scale"):
        if key not in blob:
            raise ConfigError(f"model file missing {key!r}")
    return blob


def cmd_evaluate(args) -> int:
    blob = _load_model(args.model)
    if args.dataset in SYNTHETIC_NAMES:
        data = gen_synthetic(
            args.dataset, n=args.n, d=args.d, noise=args.noise, sep=args.sep,
            seed=args.seed if args.seed is not None else 0,
        )
    else:
        schema = None
        sidecar = Path(args.dataset + ".schema.json")
        if args.schema:
            with open(args.schema, encoding="utf-8") as fh:
                schema = json.load(fh)
        elif sidecar.exists():
            with open(sidecar, encoding="utf-8") as fh:
                schema = json.load(fh)
        data = load_csv(args.dataset, schema=schema)
    if blob.get("feature_names") and blob["feature_names"] != data.feature_names:
        raise ConfigError(
            "model/dataset feature mismatch: "
            f"{blob['feature_names']} vs {data.feature_names}"
        )
    mean = np.asarray(blob["feature_mean"], dtype=np.float64)
    fscale = np.asarray(blob["feature_scale"], dtype=np.float64)
    if mean.size != data.d:
        raise ConfigError(f"model expects {mean.size} features, dataset has {data.d}")
    data.features -= mean
    data.features /= fscale
    params = ModelParams(np.asarray(blob["theta"], dtype=np.float64), float(blob["bias"]))
    spec = LossSpec(blob["loss_kind"], float(blob["scale"]))
    alphas = args.alpha or [0.01, 0.1, 1.0]
    shown = model_metrics(params, data, spec, alphas[0])
    print(f"mean_loss {shown['mean_loss']:.10g}")
    for alpha in alphas:
        m = model_metrics(params, data, spec, alpha)
        print(f"cvar@{alpha:g} {m['cvar']:.10g}")
    if data.task == "classification":
        print(f"accuracy {shown['accuracy']:.10g}")
        print(f"min_class_precision {shown['min_class_precision']:.10g}")
    return 0


def cmd_gen_data(args) -> int:
    data = gen_synthetic(
        args.name, n=args.n, d=args.d, noise=args.noise, sep=args.sep, seed=args.seed or 0
    )
    write_csv(data, args.out)
    print(f"wrote {data.n} rows x {data.d} features to {args.out}")
    return 0


def cmd_regret_bench(args) -> int:
    try:
        result = bench.regret_bench(
            args.n, args.k, args.horizon, args.loss_model, args.seeds,
            gamma=args.gamma, eta0=args.eta0,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"n={args.n} k={args.k} loss-model={args.loss_model} seeds={args.seeds}")
    print("T  median_regret")
    for t in result.horizons:
        print(f"{t}  {result.median(t):.10g}")
    slope = result.slope
    print(f"log-log slope: {slope:.6g}" if math.isfinite(slope) else "log-log slope: n/a")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "regret.csv"
        records.write_csv_rows(csv_path, result.rows(), ["T", "seed", "regret"])
        print(f"table: {csv_path}")
        if not args.no_figures:
            from .figures import save_regret_figure

            fig_path = save_regret_figure(result, out / "regret.png")
            print(f"figure: {fig_path}")
    return 0


def cmd_marginals_bench(args) -> int:
    try:
        result = bench.marginals_bench(
            args.n_grid, seeds=args.seeds, k=args.k, k_frac=args.k_frac, sigma=args.sigma
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"seeds={args.seeds} sigma={args.sigma:g}")
    print("N  k  median_tv")
    for n, k in zip(result.ns, result.ks):
        print(f"{n}  {k}  {result.median(n):.10g}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "marginals.csv"
        records.write_csv_rows(csv_path, result.rows(), ["N", "k", "seed", "tv"])
        print(f"table: {csv_path}")
        if not args.no_figures:
            from .figures import save_marginals_figure

            fig_path = save_marginals_figure(result, out / "marginals.png")
            print(f"figure: {fig_path}")
    return 0


def cmd_summarize(args) -> int:
    paths: list[str] = []
    for pattern in args.records:
        hits = sorted(globmod.glob(pattern))
        paths.extend(hits if hits else [pattern])
    recs: list[dict] = []
    for path in paths:
        try:
            recs.extend(records.read_jsonl(path))
        except OSError as exc:
            raise ConfigError(f"cannot read records file: {exc}")
        except ValueError as exc:
            raise ConfigError(str(exc))
    summary, tidy = records.summarize_records(recs, include_aborted=args.include_aborted)
    print(records.format_summary_table(summary))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary_path = out / "summary.csv"
        records.write_csv_rows(
            summary_path,
            summary,
            ["dataset", "algorithm", "metric", "mean", "sd",
             "normalized_mean", "normalized_sd", "seeds"],
        )
        tidy_path = out / "scores.csv"
        records.write_csv_rows(
            tidy_path, tidy, ["dataset", "algorithm", "metric", "seed", "value"]
        )
        print(f"summary: {summary_path}")
        print(f"scores: {tidy_path}")
        if not args.no_figures and summary:
            from .figures import save_summary_figure

            fig_path = save_summary_figure(summary, out / "summary.png")
            print(f"figure: {fig_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvaropt",
        description="Adaptive-sampling CVaR optimization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job from a JSON config")
    p.add_argument("config", help="path to the JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--output-dir", default=None, help="override the output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    p.add_argument("model", help="model JSON written by train")
    p.add_argument("dataset", help="synthetic dataset name or CSV path")
    p.add_argument("--alpha", type=float, action="append", default=None,
                   help="tail level; repeatable (default 0.01, 0.1, 1.0)")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--sep", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--schema", default=None, help="CSV schema sidecar path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("regret-bench", help="sampler regret growth benchmark")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--horizon", "-T", type=int, default=100_000, dest="horizon")
    p.add_argument("--loss-model", choices=bench.LOSS_MODELS, default="topk-bernoulli")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--out-dir", default=None, help="write regret.csv (+ regret.png) here")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_regret_bench)

    p = sub.add_parser("marginals-bench", help="marginal approximation error benchmark")
    p.add_argument("--n-grid", type=int, nargs="+", default=[50, 100, 200, 500, 1000, 2000])
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--k", type=int, default=None, help="fixed subset size (default: k-frac of n)")
    p.add_argument("--k-frac", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0, help="log-weight standard deviation")
    p.add_argument("--out-dir", default=None, help="write marginals.csv (+ marginals.png) here")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_marginals_bench)

    p = sub.add_parser("gen-data", help="write a synthetic dataset to CSV")
    p.add_argument("name", choices=SYNTHETIC_NAMES)
    p.add_argument("out", help="destination CSV path")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--sep", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("summarize", help="aggregate final records into scores")
    p.add_argument("records", nargs="+", help="record files or glob patterns")
    p.add_argument("--out-dir", default=None, help="write summary.csv/scores.csv (+ png) here")
    p.add_argument("--include-aborted", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericOverflowError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
