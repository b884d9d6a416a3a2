"""Result records, their on-disk form, and merge rules.

One record is one measured metric of one replica.  results.csv holds the
records, summary.json the aggregates and named pass/fail checks,
meta.json the provenance (version, seed, config echo).  Bytes are
deterministic for a fixed config and seed except the wall_ms column.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .._version import __version__
from ..errors import ClobberError, MixedConfigError

__all__ = [
    "ResultRecord",
    "wilson_interval",
    "aggregate",
    "write_outputs",
    "read_records",
    "merge_runs",
]

CSV_COLUMNS = ("experiment", "config_hash", "replica", "metric", "value", "flag", "wall_ms")


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    config_hash: str
    replica: int
    metric: str
    value: float
    flag: str = ""
    wall_ms: float = 0.0

    def row(self) -> tuple:
        return (
            self.experiment,
            self.config_hash,
            str(self.replica),
            self.metric,
            f"{self.value:.12g}",
            self.flag,
            f"{self.wall_ms:.3f}",
        )


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    mid = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials)) / denom
    return float(max(0.0, mid - half)), float(min(1.0, mid + half))


def aggregate(records: list[ResultRecord]) -> dict:
    """Per-metric mean, stderr, extremes, count, and flagged count."""
    by_metric: dict[str, list[ResultRecord]] = {}
    for r in records:
        by_metric.setdefault(r.metric, []).append(r)
    out = {}
    for metric in sorted(by_metric):
        rows = by_metric[metric]
        vals = np.array([r.value for r in rows], float)
        entry = {
            "count": len(vals),
            "mean": float(vals.mean()),
            "stderr": float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
            "min": float(vals.min()),
            "max": float(vals.max()),
            "flagged": int(sum(1 for r in rows if r.flag)),
        }
        if set(np.unique(vals)) <= {0.0, 1.0}:
            lo, hi = wilson_interval(int(vals.sum()), len(vals))
            entry["wilson95"] = [lo, hi]
        out[metric] = entry
    return out


def _prepare_dir(out_dir: str, force: bool):
    os.makedirs(out_dir, exist_ok=True)
    for name in ("results.csv", "summary.json", "meta.json"):
        path = os.path.join(out_dir, name)
        if os.path.exists(path) and not force:
            raise ClobberError(f"{path} exists; pass --force to overwrite")


def write_outputs(
    out_dir: str,
    records: list[ResultRecord],
    checks: list[dict],
    *,
    experiment: str,
    cfg: dict,
    cfg_hash: str,
    seed: int,
    threads: int,
    force: bool = False,
    extra_summary: dict | None = None,
):
    """Write results.csv, summary.json, meta.json into out_dir."""
    _prepare_dir(out_dir, force)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())
    summary = {
        "experiment": experiment,
        "config_hash": cfg_hash,
        "replicas": len({r.replica for r in records}),
        "aggregates": aggregate(records),
        "checks": checks,
    }
    if extra_summary:
        summary.update(extra_summary)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {
        "tool": "interlace",
        "version": __version__,
        "experiment": experiment,
        "config_hash": cfg_hash,
        "seed": seed,
        "threads": threads,
        "started_unix": int(time.time()),
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())},
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_records(path: str) -> list[ResultRecord]:
    """Load records from a results.csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_COLUMNS:
            raise MixedConfigError(f"{path}: unexpected results.csv header {header}")
        out = []
        for row in reader:
            exp, ch, rep, metric, value, flag, wall = row
            out.append(
                ResultRecord(exp, ch, int(rep), metric, float(value), flag, float(wall))
            )
    return out


def records_bytes_stable(path: str) -> bytes:
    """results.csv content with the wall_ms column blanked, for byte compares."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    buf = io.StringIO()
    w = csv.writer(buf)
    for i, row in enumerate(rows):
        if i > 0 and len(row) == len(CSV_COLUMNS):
            row = row[:-1] + [""]
        w.writerow(row)
    return buf.getvalue().encode()


def merge_runs(run_dirs: list[str], out_dir: str, force: bool = False) -> int:
    """Concatenate runs of the same experiment and config hash.

    Replica indices are offset per source directory so merged records
    stay unique; aggregates and checks are recomputed from the union
    (checks are re-evaluated only as aggregate presence, the original
    per-run checks are kept under their source index).
    """
    if not run_dirs:
        raise MixedConfigError("nothing to merge")
    all_records: list[ResultRecord] = []
    hashes = set()
    experiments = set()
    sub_checks = {}
    offset = 0
    for i, src in enumerate(run_dirs):
        recs = read_records(os.path.join(src, "results.csv"))
        if not recs:
            continue
        hashes.update(r.config_hash for r in recs)
        experiments.update(r.experiment.split("/")[0] for r in recs)
        if len(hashes) > 1:
            raise MixedConfigError(f"config hash mismatch while merging {src}")
        local_max = max(r.replica for r in recs)
        for r in recs:
            all_records.append(
                ResultRecord(
                    r.experiment, r.config_hash, r.replica + offset, r.metric, r.value, r.flag, r.wall_ms
                )
            )
        offset += local_max + 1
        spath = os.path.join(src, "summary.json")
        if os.path.exists(spath):
            with open(spath) as fh:
                sub_checks[f"run{i}"] = json.load(fh).get("checks", [])
    _prepare_dir(out_dir, force)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in all_records:
            w.writerow(r.row())
    summary = {
        "experiment": "/".join(sorted(experiments)),
        "config_hash": next(iter(hashes)) if hashes else "",
        "replicas": len({r.replica for r in all_records}),
        "aggregates": aggregate(all_records),
        "checks": [],
        "merged_from": {k: v for k, v in sorted(sub_checks.items())},
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {
        "tool": "interlace",
        "version": __version__,
        "merged": [os.path.abspath(p) for p in run_dirs],
        "config_hash": summary["config_hash"],
        "started_unix": int(time.time()),
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return len(all_records)
