"""Directional time-constant estimation for the chemical distance.

For each direction x and scale n, a trajectory cloud is sampled over a
padded slab around the segment [0, n x] and the graph distance between
occupied multiples of x near the two ends is measured.  The normalized
distance rho / (t - s) estimates the directional time constant; the
summary cross-checks homogeneity, lattice symmetry, the L1 lower bound
and subadditivity, each at two combined standard errors.
"""

from __future__ import annotations

import re

import numpy as np

from ..chemdist import bfs_distance
from ..errors import ConfigError
from ..green import GreenTable
from ..lattice import Box, Domain
from ..sampler import _window_equilibrium, sample_field
from .config import Option, Schema
from .results import ResultRecord

DEFAULT_DIRECTIONS = ("e1", "e2", "e3", "-e1", "2e1", "e1+e2", "e1+e2+e3", "2e1+e2")

SCHEMA = Schema(
    "shape",
    [
        Option("d", "int", 3, lambda v: v >= 3),
        Option("u", "float", 1.0, lambda v: v > 0),
        Option("directions", "strs", DEFAULT_DIRECTIONS),
        Option("n_grid", "ints", (10, 20, 40), lambda v: all(4 <= x <= 80 for x in v)),
        Option("replicas", "int", 32, lambda v: v >= 2),
        Option("pad_frac", "float", 0.2, lambda v: 0 < v < 1),
        Option("min_pad", "int", 10, lambda v: v >= 4),
        Option("kill_scale", "float", 4.0, lambda v: v >= 1.5),
    ],
)

_TERM = re.compile(r"^(-?)(\d*)e(\d+)$")


def parse_direction(token: str, d: int) -> np.ndarray:
    """Direction vector from a token like 'e1', '-e2' or '2e1+e3'."""
    x = np.zeros(d, np.int64)
    for term in token.replace(" ", "").split("+"):
        m = _TERM.match(term)
        if not m:
            raise ConfigError(f"bad direction term {term!r} in {token!r}")
        sign = -1 if m.group(1) else 1
        coef = int(m.group(2)) if m.group(2) else 1
        axis = int(m.group(3))
        if not 1 <= axis <= d:
            raise ConfigError(f"axis e{axis} outside dimension {d}")
        x[axis - 1] += sign * coef
    if not x.any():
        raise ConfigError(f"direction {token!r} is zero")
    return x


_STATE: dict = {}


def _cfg_key(cfg: dict):
    return tuple(sorted((k, v) for k, v in cfg.items()))


def _state(cfg: dict, seed: int) -> dict:
    if _STATE.get("cfg_key") == _cfg_key(cfg):
        return _STATE
    d = cfg["d"]
    table = GreenTable(d)
    combos = []
    for name in cfg["directions"]:
        x = parse_direction(name, d)
        for n in cfg["n_grid"]:
            end = n * x
            lo = np.minimum(0, end)
            hi = np.maximum(0, end)
            pad = max(cfg["min_pad"], round(cfg["pad_frac"] * n * int(np.abs(x).max())))
            window = Domain(
                [Box(tuple(int(v) for v in lo - pad), tuple(int(v) for v in hi + pad))]
            )
            # stability shell: a geodesic that needs the outermost quarter
            # of the padding marks the replica as window-sensitive
            half = max(2, (3 * pad) // 4)
            inner = Domain(
                [Box(tuple(int(v) for v in lo - half), tuple(int(v) for v in hi + half))]
            )
            eq = _window_equilibrium(window, table)
            combos.append(
                {
                    "name": name,
                    "x": x,
                    "n": n,
                    "window": window,
                    "inner": inner,
                    "inner_volume": int(np.prod(hi - lo + 2 * half + 1)),
                    "eq": eq,
                }
            )
    _STATE.clear()
    _STATE.update({"cfg_key": _cfg_key(cfg), "table": table, "combos": combos})
    return _STATE


def prepare(cfg: dict, seed: int):
    _state(cfg, seed)


def replica_count(cfg: dict) -> int:
    return cfg["replicas"]


def _measure(cfg: dict, combo: dict, seed: int, replica: int, ci: int):
    field = sample_field(
        combo["window"],
        cfg["u"],
        seed=seed,
        replica=replica,
        table=_STATE["table"],
        eq=combo["eq"],
        sample_window=combo["window"],
        kill_scale=cfg["kill_scale"],
        rng_path=(ci,),
    )
    x, n = combo["x"], combo["n"]
    multiples = np.arange(n + 1)[:, None] * x
    occ = field.occupied(multiples)
    near = np.nonzero(occ[: n // 4 + 1])[0]
    far = np.nonzero(occ[n - n // 4 :])[0]
    sites = field.sites()
    density = float(combo["inner"].contains(sites).sum() / combo["inner_volume"])
    if len(near) == 0 or len(far) == 0:
        return 0.0, "endpoint", density
    s = int(near[0])
    t = int(far[-1]) + n - n // 4
    dm = bfs_distance(field, tuple(int(v) for v in s * x))
    rho = dm.dist_of(tuple(int(v) for v in t * x))
    if rho is None:
        return 0.0, "disconnected", density
    flag = ""
    dm_in = bfs_distance(field, tuple(int(v) for v in s * x), within=combo["inner"])
    if dm_in.dist_of(tuple(int(v) for v in t * x)) != rho:
        flag = "window"
    return float(rho) / (t - s), flag, density


def run_replica(cfg: dict, seed: int, replica: int):
    state = _state(cfg, seed)
    rows = []
    for ci, combo in enumerate(state["combos"]):
        sigma, flag, density = _measure(cfg, combo, seed, replica, ci)
        tag = f"[{combo['name']},n={combo['n']}]"
        rows.append((f"sigma{tag}", sigma, flag))
        rows.append((f"density{tag}", density, ""))
    return rows


def _collect(cfg: dict, records: list[ResultRecord]):
    """Per-direction estimates at the largest scale, plus the full table."""
    n_max = max(cfg["n_grid"])
    table: dict[tuple[str, int], dict] = {}
    for r in records:
        m = re.match(r"sigma\[(.+),n=(\d+)\]$", r.metric)
        if not m:
            continue
        key = (m.group(1), int(m.group(2)))
        cell = table.setdefault(key, {"values": [], "skipped": 0, "window_flags": 0})
        if r.flag in ("", "window"):
            cell["values"].append(r.value)
            cell["window_flags"] += r.flag == "window"
        else:
            cell["skipped"] += 1
    est = {}
    for (name, n), cell in table.items():
        vals = np.array(cell["values"])
        if len(vals) >= 2:
            cell["mean"] = float(vals.mean())
            cell["stderr"] = float(vals.std(ddof=1) / np.sqrt(len(vals)))
            cell["min"] = float(vals.min())
        if n == n_max and len(vals) >= 2:
            est[name] = (cell["mean"], cell["stderr"], cell["min"])
    return table, est


def _cell_estimate(table: dict, name: str, n: int):
    cell = table.get((name, n))
    if cell is None or "mean" not in cell:
        return None
    return cell["mean"], cell["stderr"]


def summarize(cfg: dict, seed: int, records: list[ResultRecord]):
    d = cfg["d"]
    table, est = _collect(cfg, records)
    checks = []

    # compare 2e1 at n/2 with e1 at n when the grid allows: both then
    # measure the segment [0, n e1] in identical windows, so the check
    # isolates scaling rather than finite-size drift
    n_max = max(cfg["n_grid"])
    n_half = n_max // 2 if n_max // 2 in cfg["n_grid"] else n_max
    a = _cell_estimate(table, "e1", n_max)
    b = _cell_estimate(table, "2e1", n_half)
    if a and b:
        diff = abs(b[0] - 2 * a[0])
        tol = 2 * float(np.hypot(b[1], 2 * a[1]))
        checks.append(
            {
                "name": "homogeneity",
                "passed": diff <= tol,
                "detail": f"|sigma(2e1)@n={n_half} - 2 sigma(e1)@n={n_max}| "
                f"= {diff:.4f} <= {tol:.4f}",
            }
        )

    axis_names = [nm for nm in ("e1", "e2", "e3", "-e1") if nm in est]
    if len(axis_names) >= 2:
        # studentized max pairwise gap; 3.0 keeps the family-wise level
        # a few percent for the six pairs of a four-member orbit
        worst = ("", "", 0.0)
        for i, a in enumerate(axis_names):
            for b in axis_names[i + 1 :]:
                z = abs(est[a][0] - est[b][0]) / max(
                    float(np.hypot(est[a][1], est[b][1])), 1e-12
                )
                if z > worst[2]:
                    worst = (a, b, z)
        checks.append(
            {
                "name": "lattice_symmetry",
                "passed": worst[2] <= 3.0,
                "detail": f"largest studentized axis gap {worst[0]} vs {worst[1]}: "
                f"z = {worst[2]:.2f} (limit 3.0)",
            }
        )

    if est:
        ok = True
        details = []
        for name, (mean, _, vmin) in sorted(est.items()):
            l1 = int(np.abs(parse_direction(name, d)).sum())
            if vmin < l1 - 1e-9:
                ok = False
            details.append(f"{name}:{mean:.3f}>={l1}")
        checks.append(
            {
                "name": "l1_lower_bound",
                "passed": ok,
                "detail": " ".join(details),
            }
        )

    if all(nm in est for nm in ("e1", "e2", "e1+e2")):
        lhs = est["e1+e2"][0]
        rhs = est["e1"][0] + est["e2"][0]
        tol = 2 * float(
            np.sqrt(est["e1"][1] ** 2 + est["e2"][1] ** 2 + est["e1+e2"][1] ** 2)
        )
        checks.append(
            {
                "name": "subadditivity",
                "passed": lhs <= rhs + tol,
                "detail": f"sigma(e1+e2) = {lhs:.4f} <= {rhs:.4f} + {tol:.4f}",
            }
        )

    dens = {}
    for r in records:
        m = re.match(r"density\[(.+)\]$", r.metric)
        if m:
            dens.setdefault(m.group(1), []).append(r.value)
    extra = {
        "estimates": {
            f"{name},n={n}": {
                k: cell[k]
                for k in ("mean", "stderr", "min", "skipped", "window_flags")
                if k in cell
            }
            for (name, n), cell in sorted(table.items())
        },
        "density_mean": {k: float(np.mean(v)) for k, v in sorted(dens.items())},
    }
    return checks, extra
