"""Run-record schema (JSONL), validation, and score summarization.

Record stream format: one JSON object per line, append-only. Every record
carries ``schema_version``, ``kind``, ``run_id``, ``config_hash``,
``seed``, ``algorithm``, ``dataset``. Kinds:

* ``epoch``   periodic metrics — ``step``, ``epoch``, and per-split
  ``<split>_mean_loss`` / ``<split>_cvar`` (plus ``<split>_accuracy`` and
  ``<split>_min_class_precision`` on classification tasks).
* ``final``   the same metric fields at the selected output iterate, plus
  ``alpha``, ``steps``, ``wall_clock_s``, ``clip_events``, ``scale`` and,
  when the algorithm tracks a threshold, ``ell_final`` / ``ell_mean``.
* ``aborted`` written when training dies on a numeric overflow — ``step``
  and ``reason``. The summarizer skips aborted runs unless asked.

Summary scores follow the normalization
``(s_a - min_a s_a) / (max_a s_a - min_a s_a)`` per (dataset, metric)
across algorithms, with the standard deviation divided by ``max_a s_a``;
a degenerate min == max group normalizes to 0.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

__all__ = [
    "SCHEMA_VERSION",
    "config_hash",
    "base_record",
    "validate_record",
    "append_jsonl",
    "read_jsonl",
    "summarize_records",
    "format_summary_table",
    "write_csv_rows",
]

SCHEMA_VERSION = 1

_COMMON_KEYS = ("schema_version", "kind", "run_id", "config_hash", "seed", "algorithm", "dataset")
_KIND_KEYS = {
    "epoch": ("step", "epoch"),
    "final": ("alpha", "steps", "wall_clock_s", "clip_events", "scale"),
    "aborted": ("step", "reason"),
}


def config_hash(config: dict) -> str:
    """Short stable hash of a JSON-serializable config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def base_record(kind: str, chash: str, seed: int, algorithm: str, dataset: str) -> dict:
    if kind not in _KIND_KEYS:
        raise ValueError(f"unknown record kind {kind!r}")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "run_id": f"{chash}-s{seed}",
        "config_hash": chash,
        "seed": seed,
        "algorithm": algorithm,
        "dataset": dataset,
    }


def validate_record(rec: dict) -> None:
    """Raise ValueError when a record does not satisfy the schema above."""
    if not isinstance(rec, dict):
        raise ValueError("record must be an object")
    for key in _COMMON_KEYS:
        if key not in rec:
            raise ValueError(f"record missing key {key!r}")
    if rec["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {rec['schema_version']!r}")
    kind = rec["kind"]
    if kind not in _KIND_KEYS:
        raise ValueError(f"unknown record kind {kind!r}")
    for key in _KIND_KEYS[kind]:
        if key not in rec:
            raise ValueError(f"{kind} record missing key {key!r}")
    if kind in ("epoch", "final") and not any(k.endswith("_mean_loss") for k in rec):
        raise ValueError(f"{kind} record carries no metrics")


def append_jsonl(path: str | Path, rec: dict) -> None:
    validate_record(rec)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{i}: bad JSON record: {exc}") from exc
    return out


def _metric_keys(records: list[dict]) -> list[str]:
    keys: set[str] = set()
    for rec in records:
        for key in rec:
            for suffix in ("_mean_loss", "_cvar", "_accuracy", "_min_class_precision"):
                if key.endswith(suffix):
                    keys.add(key)
    return sorted(keys)


def summarize_records(
    records: list[dict],
    metrics: list[str] | None = None,
    include_aborted: bool = False,
) -> tuple[list[dict], list[dict]]:
    """Group final records by (dataset, algorithm); normalize per dataset.

    Returns (summary rows, tidy per-seed rows). Tidy rows keep the
    paired-seed layout: one row per (dataset, algorithm, metric, seed).
    """
    finals = [r for r in records if r.get("kind") == "final"]
    if include_aborted:
        finals += [r for r in records if r.get("kind") == "aborted"]
    if not finals:
        return [], []
    metrics = metrics or _metric_keys(finals)

    tidy: list[dict] = []
    groups: dict[tuple[str, str], list[dict]] = {}
    for rec in finals:
        groups.setdefault((rec["dataset"], rec["algorithm"]), []).append(rec)
    for (dataset, algorithm), recs in sorted(groups.items()):
        for rec in sorted(recs, key=lambda r: r["seed"]):
            for metric in metrics:
                if metric in rec:
                    tidy.append(
                        {
                            "dataset": dataset,
                            "algorithm": algorithm,
                            "metric": metric,
                            "seed": rec["seed"],
                            "value": rec[metric],
                        }
                    )

    summary: list[dict] = []
    stats: dict[tuple[str, str, str], tuple[float, float, int]] = {}
    for (dataset, algorithm), recs in groups.items():
        for metric in metrics:
            vals = [r[metric] for r in recs if metric in r]
            if not vals:
                continue
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            stats[(dataset, algorithm, metric)] = (mean, math.sqrt(var), len(vals))

    for (dataset, algorithm, metric), (mean, sd, count) in sorted(stats.items()):
        peers = [v for (ds, _alg, m), (v, _s, _c) in stats.items() if ds == dataset and m == metric]
        lo, hi = min(peers), max(peers)
        norm = 0.0 if hi == lo else (mean - lo) / (hi - lo)
        norm_sd = 0.0 if hi == 0.0 else sd / hi
        summary.append(
            {
                "dataset": dataset,
                "algorithm": algorithm,
                "metric": metric,
                "mean": mean,
                "sd": sd,
                "normalized_mean": norm,
                "normalized_sd": norm_sd,
                "seeds": count,
            }
        )
    return summary, tidy


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def format_summary_table(rows: list[dict]) -> str:
    if not rows:
        return "(no final records)"
    headers = ["dataset", "algorithm", "metric", "mean", "sd", "normalized_mean", "normalized_sd", "seeds"]
    table = [headers] + [[_fmt(row[h]) for h in headers] for row in rows]
    widths = [max(len(line[j]) for line in table) for j in range(len(headers))]
    lines = []
    for i, line in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_csv_rows(path: str | Path, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in fieldnames})
