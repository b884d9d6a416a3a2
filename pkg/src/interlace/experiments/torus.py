"""Distances inside the range of a long walk on the discrete torus.

One simple random walk of floor(u N^d) steps is run per replica; its
visited set plays the role of the occupied field.  Far pairs inside the
range are sampled uniformly (resampled up to a fixed budget when a draw
is too close) and the ratio of the in-range graph distance to the torus
L1 distance is pooled across replicas.  The spread of the upper-tail
quantile across N probes the bounded-stretch claim, and a coverage run
with doubled levels checks exact equality when the range is everything.
"""

from __future__ import annotations

import numpy as np

from ..errors import SparseRangeError
from ..rng import stream
from ..walk import direction_deltas
from .config import Option, Schema
from .results import ResultRecord

SCHEMA = Schema(
    "torus",
    [
        Option("d", "int", 3, lambda v: v >= 3),
        Option("u", "float", 1.0, lambda v: v > 0),
        Option("sizes", "ints", (16, 32, 64), lambda v: all(x >= 4 for x in v)),
        Option("replicas", "int", 800, lambda v: v >= 10),
        Option("pairs", "int", 12, lambda v: v >= 1),
        Option("gamma", "float", 2.0, lambda v: v > 0),
        Option("resample_budget", "int", 50, lambda v: v >= 1),
        Option("quantile", "float", 0.99, lambda v: 0.5 < v < 1),
        Option("spread_limit", "float", 0.25, lambda v: v > 0),
        Option("cover_size", "int", 16, lambda v: v >= 4),
        Option("cover_doublings", "int", 4, lambda v: v >= 1),
    ],
)


def torus_range(N: int, d: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Occupancy grid of one uniform-start walk run for the given steps."""
    deltas = direction_deltas(d).astype(np.int64)
    codes = rng.integers(0, 2 * d, size=steps)
    start = rng.integers(0, N, size=d)
    pos = np.empty((steps + 1, d), np.int64)
    pos[0] = start
    np.cumsum(deltas[codes], axis=0, out=pos[1:])
    pos[1:] += start
    pos %= N
    occ = np.zeros((N,) * d, bool)
    occ[tuple(pos.T)] = True
    return occ

def torus_bfs(occ: np.ndarray, src: tuple[int, ...]) -> np.ndarray:
    """Graph distances from src within the occupied set, with wrap-around.

    Returns an int32 grid, -1 where unreached or vacant.  The frontier
    sweep uses rolled boolean masks, so a full torus costs O(diam) grid
    passes rather than per-site queue work.
    """
    if not occ[src]:
        raise SparseRangeError("BFS source is not occupied")
    dist = np.full(occ.shape, -1, np.int32)
    frontier = np.zeros_like(occ)
    frontier[src] = True
    dist[src] = 0
    level = 0
    while frontier.any():
        level += 1
        nb = np.zeros_like(occ)
        for ax in range(occ.ndim):
            nb |= np.roll(frontier, 1, axis=ax)
            nb |= np.roll(frontier, -1, axis=ax)
        frontier = nb & occ & (dist < 0)
        dist[frontier] = level
    return dist


def torus_l1(x: np.ndarray, y: np.ndarray, N: int) -> np.ndarray:
    dx = np.abs(np.asarray(x, np.int64) - np.asarray(y, np.int64))
    return np.minimum(dx, N - dx).sum(axis=-1)


def _far_pairs(occ, N, threshold, pairs, budget, rng):
    """A BFS source and far targets, all uniform over occupied sites."""
    sites = np.argwhere(occ)
    if len(sites) < 2:
        raise SparseRangeError("occupied set too small for pair sampling")
    src = sites[rng.integers(len(sites))]
    targets = []
    for _ in range(pairs):
        for _ in range(budget):
            y = sites[rng.integers(len(sites))]
            if torus_l1(src, y, N) >= threshold:
                targets.append(y)
                break
        else:
            raise SparseRangeError(
                f"no occupied site at torus distance >= {threshold} after {budget} draws"
            )
    return tuple(int(v) for v in src), np.array(targets, np.int64)


def replica_count(cfg: dict) -> int:
    return cfg["replicas"]


def run_replica(cfg: dict, seed: int, replica: int):
    d, u = cfg["d"], cfg["u"]
    rows = []
    for si, N in enumerate(sorted(cfg["sizes"])):
        rng = stream(seed, si, replica, 0)
        occ = torus_range(N, d, int(u * N**d), rng)
        threshold = np.log(N) ** cfg["gamma"]
        try:
            src, targets = _far_pairs(
                occ, N, threshold, cfg["pairs"], cfg["resample_budget"], rng
            )
        except SparseRangeError as exc:
            rows.append((f"ratio[N={N}]", 0.0, f"skipped:{type(exc).__name__}"))
            continue
        dist = torus_bfs(occ, src)
        rho = dist[tuple(targets.T)]
        base = torus_l1(np.array(src), targets, N)
        for r, b in zip(rho, base):
            if r < 0:
                rows.append((f"ratio[N={N}]", 0.0, "unreached"))
            else:
                rows.append((f"ratio[N={N}]", float(r) / float(b), ""))
        rows.append((f"occupancy[N={N}]", float(occ.mean()), ""))
    if replica == 0:
        rows.extend(_cover_rows(cfg, seed))
    return rows


def _cover_rows(cfg: dict, seed: int):
    """Doubling levels until the walk covers a small torus."""
    d, N = cfg["d"], cfg["cover_size"]
    u = cfg["u"]
    rng = stream(seed, 9000, 0)
    for _ in range(cfg["cover_doublings"] + 1):
        occ = torus_range(N, d, int(u * N**d), rng)
        if occ.all():
            break
        u *= 2
    else:
        return [("cover_ratio_max", 0.0, "not_covered")]
    src, targets = _far_pairs(occ, N, 2, cfg["pairs"], cfg["resample_budget"], rng)
    dist = torus_bfs(occ, src)
    ratios = dist[tuple(targets.T)] / torus_l1(np.array(src), targets, N)
    return [
        ("cover_ratio_max", float(ratios.max()), ""),
        ("cover_level", float(u), ""),
    ]


def summarize(cfg: dict, seed: int, records: list[ResultRecord]):
    by: dict[str, list[ResultRecord]] = {}
    for r in records:
        by.setdefault(r.metric, []).append(r)
    q = cfg["quantile"]
    p99 = {}
    stats = {}
    for N in sorted(cfg["sizes"]):
        rs = by.get(f"ratio[N={N}]", [])
        vals = np.array([r.value for r in rs if not r.flag])
        unreached = sum(r.flag == "unreached" for r in rs)
        skipped = sum(r.flag.startswith("skipped") for r in rs)
        if len(vals):
            p99[N] = float(np.quantile(vals, q))
            stats[str(N)] = {
                "pairs": len(vals),
                "q": p99[N],
                "median": float(np.median(vals)),
                "max": float(vals.max()),
                "unreached": unreached,
                "skipped_replicas": skipped,
                "mean_occupancy": float(
                    np.mean([r.value for r in by.get(f"occupancy[N={N}]", [])] or [0.0])
                ),
            }
    checks = []
    if len(p99) >= 2:
        lo, hi = min(p99.values()), max(p99.values())
        spread = hi / lo - 1
        checks.append(
            {
                "name": "stretch_quantile_spread",
                "passed": spread < cfg["spread_limit"],
                "detail": f"{int(100 * q)}th percentile of rho/d_N in [{lo:.3f}, {hi:.3f}], "
                f"spread {100 * spread:.1f}% (limit {100 * cfg['spread_limit']:.0f}%)",
            }
        )
    cover = by.get("cover_ratio_max", [])
    if cover:
        r0 = cover[0]
        lvl = by.get("cover_level", [])
        checks.append(
            {
                "name": "covered_torus_equality",
                "passed": (not r0.flag) and r0.value == 1.0,
                "detail": (
                    f"max ratio {r0.value:g} at covering level {lvl[0].value:g}"
                    if not r0.flag
                    else f"torus not covered within doubling budget ({r0.flag})"
                ),
            }
        )
    return checks, {"per_size": stats}
