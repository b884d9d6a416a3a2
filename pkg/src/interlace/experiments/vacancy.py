"""Vacancy law experiment: P[A untouched at level u] vs exp(-u cap(A)).

The sharpest end-to-end check of the trajectory sampler: the predicted
vacancy of a small set is a pure function of its capacity, so any bias
in entrance sampling, walk stepping, or truncation shows up here.  Each
checked set gets its own kill radius sized from the configured bias
budget, and the tolerance in the emitted checks is 3 sigma plus that
certified bias.
"""

from __future__ import annotations

import numpy as np

from ..equilibrium import equilibrium
from ..green import GreenTable, sphere_green_max
from ..lattice import Box, Domain, max_distance
from ..sampler import (
    EquilibriumSampler,
    _kill_radius_for,
    _window_equilibrium,
    vacancy_replica,
)
from .config import Option, Schema
from .results import ResultRecord, wilson_interval

SCHEMA = Schema(
    "vacancy",
    [
        Option("d", "int", 3, lambda v: v >= 3),
        Option("u", "floats", (0.5, 1.0), lambda v: len(v) >= 1 and all(x > 0 for x in v)),
        Option("sets", "strs", ("point", "pair", "spaced")),
        Option("replicas", "int", 10_000, lambda v: v >= 1),
        Option("bias", "float", 5e-3, lambda v: 0 < v < 1),
        Option("margin", "int", 1, lambda v: v >= 1),
    ],
)

# named target sets, given in d=3 coordinates and embedded for higher d
_SET_POINTS = {
    "point": [(0, 0, 0)],
    "pair": [(0, 0, 0), (1, 0, 0)],
    "spaced": [(0, 0, 0), (3, 0, 0)],
    "triple": [(0, 0, 0), (1, 0, 0), (0, 1, 0)],
}

_STATE: dict = {}


def _build_state(cfg: dict, seed: int) -> dict:
    d = cfg["d"]
    table = GreenTable(d)
    combos = []
    for name in cfg["sets"]:
        if name not in _SET_POINTS:
            raise ValueError(f"unknown vacancy set {name!r} (known: {sorted(_SET_POINTS)})")
        pts3 = np.asarray(_SET_POINTS[name], np.int64)
        target = np.zeros((len(pts3), d), np.int64)
        target[:, :3] = pts3
        m = cfg["margin"]
        window = Domain(
            (Box(tuple(target.min(axis=0) - m), tuple(target.max(axis=0) + m)),)
        )
        eq = _window_equilibrium(window, table)
        smp = EquilibriumSampler(eq)
        cap_A = equilibrium(target, table=table).capacity
        bb = window.bounding_box()
        center = np.asarray(bb.lo, np.int64) + np.asarray(bb.shape, np.int64) // 2
        reach = int(max_distance(center, target, "linf"))
        for u in cfg["u"]:
            mean_traj = u * eq.capacity
            per_needed = min(0.5, cfg["bias"] / max(mean_traj, 1e-12))
            radius = _kill_radius_for(cap_A, reach, per_needed, d)
            combos.append(
                {
                    "name": name,
                    "u": float(u),
                    "target": target,
                    "smp": smp,
                    "center": center,
                    "radius": radius,
                    "expected": float(np.exp(-u * cap_A)),
                    "bias": float(mean_traj * cap_A * sphere_green_max(radius - reach, d)),
                }
            )
    return {"combos": combos, "cfg_key": _cfg_key(cfg)}


def _cfg_key(cfg: dict):
    return tuple(sorted((k, v) for k, v in cfg.items()))


def _state(cfg: dict, seed: int) -> dict:
    if _STATE.get("cfg_key") != _cfg_key(cfg):
        _STATE.clear()
        _STATE.update(_build_state(cfg, seed))
    return _STATE


def prepare(cfg: dict, seed: int):
    _state(cfg, seed)


def replica_count(cfg: dict) -> int:
    return int(cfg["replicas"])


def run_replica(cfg: dict, seed: int, replica: int):
    state = _state(cfg, seed)
    out = []
    for ci, combo in enumerate(state["combos"]):
        vacant, n_traj = vacancy_replica(
            combo["target"],
            combo["smp"],
            combo["center"],
            combo["radius"],
            combo["u"],
            seed,
            ci,
            replica,
        )
        out.append((f"vacant[{combo['name']},u={combo['u']:g}]", float(vacant), ""))
    return out


def summarize(cfg: dict, seed: int, records: list[ResultRecord]):
    state = _state(cfg, seed)
    checks = []
    extra = {"combos": []}
    for combo in state["combos"]:
        metric = f"vacant[{combo['name']},u={combo['u']:g}]"
        vals = [r.value for r in records if r.metric == metric]
        n = len(vals)
        freq = float(np.mean(vals)) if n else 0.0
        expected = combo["expected"]
        sigma = float(np.sqrt(expected * (1.0 - expected) / max(n, 1)))
        tol = 3.0 * sigma + combo["bias"]
        lo, hi = wilson_interval(int(np.sum(vals)), n)
        passed = abs(freq - expected) <= tol
        checks.append(
            {
                "name": f"vacancy[{combo['name']},u={combo['u']:g}]",
                "passed": bool(passed),
                "detail": (
                    f"freq={freq:.4f} expected={expected:.4f} "
                    f"tol=3sigma+bias={tol:.4f} wilson95=[{lo:.4f},{hi:.4f}]"
                ),
            }
        )
        extra["combos"].append(
            {
                "set": combo["name"],
                "u": combo["u"],
                "capacity_window": combo["smp"].capacity,
                "expected": expected,
                "freq": freq,
                "bias_budget": combo["bias"],
                "kill_radius": combo["radius"],
            }
        )
    return checks, extra
