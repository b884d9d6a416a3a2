"""Connectivity of the trajectory cloud across coupled levels.

One cloud is sampled per replica at the top level with fixed-length
trajectory prefixes; lower levels reuse it by label thinning, so the
level grid is monotone by construction.  At each level the intersection
graph of prefixes is examined: the replica counts as connected when the
graph is connected at every level, and its switch count is the largest
graph diameter seen over the levels.
"""

from __future__ import annotations

import numpy as np

from ..chemdist import graph_diameter, trajectory_graph
from ..errors import ConfigError
from ..green import GreenTable
from ..lattice import box_domain
from ..sampler import _window_equilibrium, sample_field
from .config import Option, Schema
from .results import ResultRecord, wilson_interval

SCHEMA = Schema(
    "connect",
    [
        Option("d", "int", 3, lambda v: v >= 3),
        Option("u_min", "float", 0.5, lambda v: v > 0),
        Option("u_max", "float", 2.0, lambda v: v > 0),
        Option("u_points", "int", 8, lambda v: v >= 2),
        Option("n_grid", "ints", (20, 30), lambda v: all(v2 >= 4 for v2 in v)),
        Option("replicas", "int", 200, lambda v: v >= 20),
        Option("switch_limit", "int", 3, lambda v: v >= 1),
        Option("prefix_mult", "int", 48, lambda v: v >= 1),
        Option("per_site_cap", "int", 15, lambda v: v >= 2),
    ],
)

_STATE: dict = {}


def _cfg_key(cfg: dict):
    return tuple(sorted((k, v) for k, v in cfg.items()))


def _state(cfg: dict, seed: int) -> dict:
    if _STATE.get("cfg_key") == _cfg_key(cfg):
        return _STATE
    if cfg["u_min"] >= cfg["u_max"]:
        raise ConfigError("u_min must be below u_max")
    d = cfg["d"]
    table = GreenTable(d)
    windows = []
    for n in sorted(cfg["n_grid"]):
        dom = box_domain((0,) * d, n, d)
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
    grid = np.linspace(cfg["u_min"], cfg["u_max"], cfg["u_points"])
    rows = []
    for ni, spec in enumerate(state["windows"]):
        n = spec["n"]
        horizon = cfg["prefix_mult"] * n * n
        field = sample_field(
            spec["window"],
            cfg["u_max"],
            seed=seed,
            replica=replica,
            table=state["table"],
            eq=spec["eq"],
            horizon=horizon,
            rng_path=(ni,),
        )
        graph = trajectory_graph(field, horizon, per_site_cap=cfg["per_site_cap"])
        connected_all = True
        worst = 0
        for u in grid:
            ok, diam = graph_diameter(graph, level=float(u))
            if not ok:
                connected_all = False
                break
            worst = max(worst, diam)
        flag = "saturated" if graph.conservative else ""
        rows.append((f"conn[n={n}]", float(connected_all), flag))
        if connected_all:
            rows.append((f"switch[n={n}]", float(worst), flag))
        rows.append((f"n_traj[n={n}]", float(len(field.trajectories)), ""))
    return rows


def _freq(vals: list[float]) -> tuple[float, int]:
    return (float(np.mean(vals)) if vals else 0.0, len(vals))


def summarize(cfg: dict, seed: int, records: list[ResultRecord]):
    by: dict[str, list[float]] = {}
    for r in records:
        by.setdefault(r.metric, []).append(r.value)
    grid = sorted(cfg["n_grid"])
    limit = cfg["switch_limit"]
    conn = {}
    swi = {}
    for n in grid:
        conn[n] = _freq(by.get(f"conn[n={n}]", []))
        switches = by.get(f"switch[n={n}]", [])
        swi[n] = (
            float(np.mean([s <= limit for s in switches])) if switches else 0.0,
            len(switches),
        )
    checks = []
    n0 = grid[0]
    f, k = conn[n0]
    checks.append(
        {
            "name": f"connected_freq[n={n0}]",
            "passed": f >= 0.9,
            "detail": f"all-level connectivity {f:.3f} of {k} (need >= 0.9)",
        }
    )
    f, k = swi[n0]
    checks.append(
        {
            "name": f"switch_freq[n={n0}]",
            "passed": f >= 0.9,
            "detail": f"switch <= {limit} at all levels: {f:.3f} of {k} connected (need >= 0.9)",
        }
    )
    for a, b in zip(grid, grid[1:]):
        for label, store in (("connected", conn), ("switch", swi)):
            fa, ka = store[a]
            fb, kb = store[b]
            if min(ka, kb) == 0:
                continue
            se = float(np.sqrt(fa * (1 - fa) / ka + fb * (1 - fb) / kb))
            checks.append(
                {
                    "name": f"{label}_monotone[{a}->{b}]",
                    "passed": fb >= fa - 2 * se,
                    "detail": f"{fa:.3f} -> {fb:.3f} (2se = {2 * se:.3f})",
                }
            )
    extra = {
        "switch_reference": int(np.ceil(cfg["d"] / 2)) - 1,
        "frequencies": {
            str(n): {
                "connected": conn[n][0],
                "connected_wilson95": wilson_interval(round(conn[n][0] * conn[n][1]), conn[n][1]),
                "switch_ok": swi[n][0],
                "mean_trajectories": float(np.mean(by.get(f"n_traj[n={n}]", [0.0]))),
            }
            for n in grid
        },
    }
    return checks, extra
