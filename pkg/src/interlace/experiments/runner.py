"""Experiment orchestration: replica parallelism and output assembly.

An experiment module provides a SCHEMA, optional prepare(cfg, seed) run
once in the parent (heavy shared state such as solved window measures is
inherited by forked workers), replica_count(cfg), run_replica(cfg, seed,
replica) returning (metric, value, flag) triples, and summarize(cfg,
seed, records) returning (checks, extra_summary).  Replica outputs are
deterministic per (cfg, seed, replica), so thread count never changes
results, only wall time.
"""

from __future__ import annotations

import importlib
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor

from ..errors import ConfigError
from .config import Schema, config_hash, parse_config, resolve_section
from .results import ResultRecord, write_outputs

__all__ = ["EXPERIMENT_KINDS", "schemas", "load_experiment", "run_experiment"]

EXPERIMENT_KINDS = ("vacancy", "lemmas", "shape", "ldp", "connect", "torus", "slab")


def load_experiment(kind: str):
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    return importlib.import_module(f"{__package__}.{kind}")


class _SchemaMap:
    """Lazy view of all config schemas, keyed by section name.

    Experiment modules are imported only when their section is actually
    referenced, so running one kind never pays for the others.
    """

    _names = ("run",) + EXPERIMENT_KINDS

    def __contains__(self, name) -> bool:
        return name in self._names

    def __getitem__(self, name: str) -> Schema:
        if name == "run":
            return RUN_SCHEMA
        if name not in self._names:
            raise KeyError(name)
        return load_experiment(name).SCHEMA

    def __iter__(self):
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)


def schemas() -> _SchemaMap:
    """All config schemas, including the shared [run] section."""
    return _SchemaMap()


from .config import Option  # noqa: E402  (schema constants below)

RUN_SCHEMA = Schema(
    "run",
    [
        Option("seed", "int", 0, lambda v: 0 <= v < (1 << 64)),
        Option("threads", "int", 1, lambda v: v >= 1),
        Option("out", "str", "out"),
        Option("force", "bool", False),
    ],
)


def _worker(payload):
    kind, cfg, seed, replica = payload
    mod = load_experiment(kind)
    t0 = time.perf_counter()
    triples = mod.run_replica(cfg, seed, replica)
    wall = (time.perf_counter() - t0) * 1000.0
    return replica, wall, triples


def run_experiment(
    kind: str,
    *,
    config_text: str = "",
    config_path: str = "<none>",
    overrides: dict | None = None,
    seed: int | None = None,
    threads: int | None = None,
    out_dir: str | None = None,
    force: bool | None = None,
) -> dict:
    """Run one experiment end to end and write its output directory.

    Returns the summary dict.  CLI flags arrive as explicit arguments and
    override both section values and [run] values.
    """
    parsed = parse_config(config_text, schemas(), config_path) if config_text else {}
    run_cfg = resolve_section(
        parsed,
        RUN_SCHEMA,
        {"seed": seed, "threads": threads, "out": out_dir, "force": force},
    )
    mod = load_experiment(kind)
    cfg = resolve_section(parsed, mod.SCHEMA, overrides)
    the_seed = int(run_cfg["seed"])
    n_threads = int(run_cfg["threads"])
    cfg_hash = config_hash(kind, cfg, the_seed)

    prepare = getattr(mod, "prepare", None)
    if prepare is not None:
        prepare(cfg, the_seed)

    replicas = int(mod.replica_count(cfg))
    payloads = [(kind, cfg, the_seed, r) for r in range(replicas)]
    results = []
    if n_threads > 1 and replicas > 1:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, replicas // (8 * n_threads))
        with ProcessPoolExecutor(max_workers=n_threads, mp_context=ctx) as pool:
            results = list(pool.map(_worker, payloads, chunksize=chunk))
    else:
        results = [_worker(p) for p in payloads]

    records: list[ResultRecord] = []
    for replica, wall, triples in sorted(results, key=lambda t: t[0]):
        for metric, value, flag in triples:
            records.append(
                ResultRecord(kind, cfg_hash, replica, metric, float(value), flag, wall)
            )
    checks, extra = mod.summarize(cfg, the_seed, records)

    write_outputs(
        run_cfg["out"],
        records,
        checks,
        experiment=kind,
        cfg=cfg,
        cfg_hash=cfg_hash,
        seed=the_seed,
        threads=n_threads,
        force=bool(run_cfg["force"]),
        extra_summary=extra,
    )
    summary = {
        "experiment": kind,
        "config_hash": cfg_hash,
        "out": run_cfg["out"],
        "records": len(records),
        "checks": checks,
    }
    if extra:
        summary["extra"] = extra
    return summary
