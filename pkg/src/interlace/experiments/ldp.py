"""Distance-tail decay across scales.

Each replica samples a cloud over a padded ball, measures chemical
distances from the origin (projected along the first axis when vacant)
to every occupied site of the core ball B(n), and records the largest.
The threshold C is auto-calibrated at the smallest scale as a multiple
of the median distance-to-norm ratio, then held fixed: the fraction of
replicas containing any site beyond C n must not increase with n.
"""

from __future__ import annotations

import numpy as np

from ..chemdist import bfs_distance, ray_scan
from ..errors import InterlaceError
from ..green import GreenTable
from ..lattice import box_domain
from ..sampler import _window_equilibrium, sample_field
from .config import Option, Schema
from .results import ResultRecord, wilson_interval

SCHEMA = Schema(
    "ldp",
    [
        Option("d", "int", 3, lambda v: v >= 3),
        Option("u", "float", 1.0, lambda v: v > 0),
        Option("n_grid", "ints", (10, 20, 40), lambda v: all(4 <= x <= 80 for x in v)),
        Option("replicas", "int", 200, lambda v: v >= 20),
        Option("pad_frac", "float", 0.3, lambda v: 0 < v < 1),
        Option("min_pad", "int", 8, lambda v: v >= 4),
        Option("kill_scale", "float", 4.0, lambda v: v >= 1.5),
        Option("c_mult", "float", 2.0, lambda v: v > 1),
    ],
)

_STATE: dict = {}


def _cfg_key(cfg: dict):
    return tuple(sorted((k, v) for k, v in cfg.items()))


def _state(cfg: dict, seed: int) -> dict:
    if _STATE.get("cfg_key") == _cfg_key(cfg):
        return _STATE
    d = cfg["d"]
    table = GreenTable(d)
    windows = []
    for n in sorted(cfg["n_grid"]):
        pad = max(cfg["min_pad"], round(cfg["pad_frac"] * n))
        dom = box_domain((0,) * d, n + pad, d)
        windows.append({"n": n, "window": dom, "eq": _window_equilibrium(dom, table)})
    _STATE.clear()
    _STATE.update({"cfg_key": _cfg_key(cfg), "table": table, "windows": windows})
    return _STATE


def prepare(cfg: dict, seed: int):
    _state(cfg, seed)


def replica_count(cfg: dict) -> int:
    return cfg["replicas"]


def run_replica(cfg: dict, seed: int, replica: int):
    state = _state(cfg, seed)
    d = cfg["d"]
    n_min = min(cfg["n_grid"])
    e1 = tuple([1] + [0] * (d - 1))
    rows = []
    for ni, spec in enumerate(state["windows"]):
        n = spec["n"]
        field = sample_field(
            spec["window"],
            cfg["u"],
            seed=seed,
            replica=replica,
            table=state["table"],
            eq=spec["eq"],
            sample_window=spec["window"],
            kill_scale=cfg["kill_scale"],
            rng_path=(ni,),
        )
        origin = (0,) * d
        try:
            if field.occupied(np.array([origin]))[0]:
                base = origin
            else:
                base = tuple(int(v) for v in ray_scan(field, origin, e1).sites()[0])
        except InterlaceError as exc:
            rows.append((f"max_dist[n={n}]", 0.0, f"skipped:{type(exc).__name__}"))
            continue
        dm = bfs_distance(field, base)
        ss = field.site_set()
        sites = ss.sites()
        core = np.abs(sites).max(axis=1) <= n
        dists = dm.dist[core]
        unreached = int((dists < 0).sum())
        finite = dists[dists >= 0]
        rows.append((f"max_dist[n={n}]", float(finite.max()) if len(finite) else 0.0, ""))
        rows.append((f"unreached[n={n}]", float(unreached), ""))
        if n == n_min:
            norms = np.abs(sites[core]).max(axis=1)
            good = (dists >= 0) & (norms >= 1)
            if good.any():
                ratio = np.median(dists[good] / norms[good])
                rows.append(("ratio_med", float(ratio), ""))
    return rows


def summarize(cfg: dict, seed: int, records: list[ResultRecord]):
    by_metric: dict[str, dict[int, float]] = {}
    for r in records:
        if not r.flag:
            by_metric.setdefault(r.metric, {})[r.replica] = r.value
    meds = np.array(list(by_metric.get("ratio_med", {}).values()))
    C = cfg["c_mult"] * float(np.median(meds)) if len(meds) else np.nan
    grid = sorted(cfg["n_grid"])
    frac = {}
    for n in grid:
        dists = by_metric.get(f"max_dist[n={n}]", {})
        unreached = by_metric.get(f"unreached[n={n}]", {})
        reps = sorted(dists)
        if not reps or not np.isfinite(C):
            continue
        hits = [dists[r] > C * n or unreached.get(r, 0) > 0 for r in reps]
        frac[n] = (float(np.mean(hits)), len(reps))
    checks = []
    for a, b in zip(grid, grid[1:]):
        if a not in frac or b not in frac:
            continue
        fa, na = frac[a]
        fb, nb = frac[b]
        se = float(np.sqrt(fa * (1 - fa) / na + fb * (1 - fb) / nb))
        checks.append(
            {
                "name": f"tail_decay[{a}->{b}]",
                "passed": fb - fa <= 2 * se,
                "detail": f"exceedance {fa:.4f} -> {fb:.4f} (2se = {2 * se:.4f}, C = {C:.3f})",
            }
        )
    extra = {
        "C": C,
        "exceedance": {
            str(n): {"fraction": f, "replicas": k, "wilson95": wilson_interval(round(f * k), k)}
            for n, (f, k) in frac.items()
        },
    }
    return checks, extra
