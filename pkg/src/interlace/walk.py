"""Simple random walk engine: stopped paths, ranges, torus traces.

Paths are stored as a start site plus one byte per step (direction code
c: axis c >> 1, negative if c & 1), so a million-step walk costs a
megabyte.  Stop rules cover entrance / first-return / exit times together
with a kill radius and a step cap; indicator walks (did it return before
leaving the kill ball?) run through a numba kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    EmptyEnsembleError,
    RangeOverrunError,
    UnboundedStopError,
)
from .lattice import COORD_LIMIT, Domain, Packing, as_points
from .rng import stream

__all__ = [
    "direction_deltas",
    "StoppedPath",
    "WalkState",
    "run_until",
    "path_positions",
    "path_range",
    "MultiRangeStats",
    "multi_range_stats",
    "sample_range_paths",
    "torus_trace",
]

HARD_STEP_LIMIT = 1 << 31
_CHUNK = 8192


def direction_deltas(d: int) -> np.ndarray:
    """(2d, d) table of unit steps; code 2i is +e_i, code 2i+1 is -e_i."""
    out = np.zeros((2 * d, d), np.int64)
    for i in range(d):
        out[2 * i, i] = 1
        out[2 * i + 1, i] = -1
    return out


@dataclass
class StoppedPath:
    """A walk trajectory frozen at its stop time."""

    start: tuple[int, ...]
    codes: np.ndarray  # uint8, one per step
    stop_kind: str  # entrance | hitting | exit | killed | capped
    d: int

    @property
    def stop_time(self) -> int:
        return len(self.codes)

    def positions(self) -> np.ndarray:
        """(stop_time + 1, d) array of visited positions, start included."""
        return path_positions(self.start, self.codes, self.d)

    def final(self) -> np.ndarray:
        return self.positions()[-1] if len(self.codes) else np.asarray(self.start, np.int64)


def path_positions(start, codes: np.ndarray, d: int) -> np.ndarray:
    deltas = direction_deltas(d)
    pos = np.empty((len(codes) + 1, d), np.int64)
    pos[0] = np.asarray(start, np.int64)
    if len(codes):
        np.cumsum(deltas[codes], axis=0, out=pos[1:])
        pos[1:] += pos[0]
    return pos


def path_range(path: StoppedPath, prefix: int | None = None) -> np.ndarray:
    """Distinct sites visited by the path (optionally only its first steps)."""
    pos = path.positions()
    if prefix is not None:
        pos = pos[: prefix + 1]
    return np.unique(pos, axis=0)


@dataclass
class WalkState:
    position: tuple[int, ...]
    rng: np.random.Generator
    time: int = 0


class _MemberTest:
    """Fast membership for a stop set given as a Domain or a site array."""

    def __init__(self, target):
        if isinstance(target, Domain):
            self.domain = target
            self.keys = None
            self.d = target.dim
        else:
            pts = as_points(target)
            self.domain = None
            self.d = pts.shape[1]
            lo = pts.min(axis=0)
            hi = pts.max(axis=0)
            self.bb_lo = lo
            self.bb_hi = hi
            self.pk = Packing(lo, hi - lo + 1)
            self.keys = np.sort(self.pk.pack(pts))

    def check(self, pos: np.ndarray) -> np.ndarray:
        if self.domain is not None:
            return self.domain.contains(pos)
        mask = np.all((pos >= self.bb_lo) & (pos <= self.bb_hi), axis=1)
        out = np.zeros(len(pos), bool)
        if mask.any():
            keys = self.pk.pack(pos[mask])
            idx = np.searchsorted(self.keys, keys)
            idx_c = np.clip(idx, 0, len(self.keys) - 1)
            out[mask] = self.keys[idx_c] == keys
        return out


def run_until(
    state: WalkState,
    until: str,
    target,
    time_cap: int | None = None,
    kill_center=None,
    kill_radius: int | None = None,
    chunk: int = _CHUNK,
) -> StoppedPath:
    """Advance the walk until a stop rule fires and return the frozen path.

    until: 'entrance' (first time in target, start counts), 'hitting'
    (first time >= 1 in target), or 'exit' (first time outside target).
    A kill radius and/or step cap may cut the walk first; the returned
    stop_kind says which rule fired ('killed' / 'capped').
    """
    if until not in ("entrance", "hitting", "exit"):
        raise ValueError(f"unknown stop rule {until!r}")
    member = _MemberTest(target)
    d = member.d
    start = np.asarray(state.position, np.int64)
    if len(start) != d:
        raise ValueError("dimension mismatch between walker and stop set")
    if until in ("entrance", "hitting") and time_cap is None and kill_radius is None:
        raise UnboundedStopError("entrance/hitting rule needs a time cap or kill radius")
    if until == "entrance" and member.check(start[None, :])[0]:
        return StoppedPath(tuple(int(v) for v in start), np.empty(0, np.uint8), "entrance", d)
    if until == "exit" and not member.check(start[None, :])[0]:
        return StoppedPath(tuple(int(v) for v in start), np.empty(0, np.uint8), "exit", d)

    deltas = direction_deltas(d)
    kc = None if kill_center is None else np.asarray(kill_center, np.int64)
    blocks = []
    total = 0
    pos0 = start
    while True:
        if time_cap is not None:
            room = time_cap - total
            if room <= 0:
                return _freeze(start, blocks, total, "capped", d)
        else:
            room = chunk
        if total >= HARD_STEP_LIMIT:
            raise RangeOverrunError("walk exceeded the hard step budget")
        n = int(min(chunk, room))
        codes = state.rng.integers(0, 2 * d, size=n, dtype=np.uint8)
        pos = np.cumsum(deltas[codes], axis=0)
        pos += pos0
        if until == "exit":
            fired = ~member.check(pos)
        else:
            fired = member.check(pos)
        if kill_radius is not None:
            killed = np.abs(pos - kc).max(axis=1) > kill_radius
        else:
            killed = np.zeros(n, bool)
        any_fire = fired.any()
        any_kill = killed.any()
        if any_fire or any_kill:
            i_fire = int(np.argmax(fired)) if any_fire else n
            i_kill = int(np.argmax(killed)) if any_kill else n
            cut = min(i_fire, i_kill)
            blocks.append(codes[: cut + 1])
            kind = until if i_fire <= i_kill else "killed"
            return _freeze(start, blocks, total + cut + 1, kind, d)
        blocks.append(codes)
        total += n
        pos0 = pos[-1]
        if np.abs(pos0).max() >= COORD_LIMIT - chunk:
            raise RangeOverrunError("walk left the supported coordinate range")


def _freeze(start, blocks, total, kind, d) -> StoppedPath:
    codes = np.concatenate(blocks) if blocks else np.empty(0, np.uint8)
    assert len(codes) == total
    return StoppedPath(tuple(int(v) for v in start), codes, kind, d)


# ------------------------------------------------------- indicator kernel


@njit(cache=True)
def _indicator_steps(pos, codes, deltas, bb_lo, bb_hi, pack_lo, strides, keys, kc, radius, t0, check_from):
    """Walk through codes; return (status, steps_used).

    status 0: codes exhausted, 1: entered the key set, 2: left the kill
    ball.  Membership starts to count from global time check_from.
    """
    d = pos.shape[0]
    t = t0
    for i in range(codes.shape[0]):
        c = codes[i]
        ax = c >> 1
        if c & 1:
            pos[ax] -= 1
        else:
            pos[ax] += 1
        t += 1
        if t >= check_from:
            inside = True
            for j in range(d):
                if pos[j] < bb_lo[j] or pos[j] > bb_hi[j]:
                    inside = False
                    break
            if inside:
                key = np.int64(0)
                for j in range(d):
                    key += (pos[j] - pack_lo[j]) * strides[j]
                k = np.searchsorted(keys, key)
                if k < keys.shape[0] and keys[k] == key:
                    return 1, i + 1
        far = np.int64(0)
        for j in range(d):
            a = pos[j] - kc[j]
            if a < 0:
                a = -a
            if a > far:
                far = a
        if far > radius:
            return 2, i + 1
    return 0, codes.shape[0]


def hit_before_escape(
    start,
    target_sites,
    kill_center,
    kill_radius: int,
    rng: np.random.Generator,
    from_time: int = 0,
    block: int = _CHUNK,
) -> tuple[bool, int]:
    """Does the walk enter the target before leaving the kill ball?

    Membership counts from global time ``from_time`` (1 gives the
    first-return time).  Returns (hit, steps_taken).
    """
    pts = as_points(target_sites)
    d = pts.shape[1]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    pk = Packing(lo, hi - lo + 1)
    keys = np.sort(pk.pack(pts))
    deltas = direction_deltas(d)
    pos = np.array(start, np.int64).copy()
    kc = np.asarray(kill_center, np.int64)
    t = 0
    while True:
        codes = rng.integers(0, 2 * d, size=block, dtype=np.uint8)
        status, used = _indicator_steps(
            pos, codes, deltas, lo, hi, pk.lo, pk.strides, keys, kc, kill_radius, t, from_time
        )
        t += used
        if status == 1:
            return True, t
        if status == 2:
            return False, t
        if t >= HARD_STEP_LIMIT:
            raise RangeOverrunError("indicator walk exceeded the hard step budget")


# ------------------------------------------------------------ range stats


@dataclass
class MultiRangeStats:
    """Per-walk and union statistics of fixed-horizon ranges."""

    volumes: np.ndarray  # distinct sites per walk
    diameters: np.ndarray  # sup-norm diameter of each range
    union_volume: int
    pairwise_disjoint: bool
    horizon: int
    d: int


def multi_range_stats(paths: list[StoppedPath], horizon: int | None = None) -> MultiRangeStats:
    """Range statistics of an ensemble of walks over a common horizon."""
    if not paths:
        raise EmptyEnsembleError("no walks supplied")
    d = paths[0].d
    hor = horizon if horizon is not None else min(p.stop_time for p in paths)
    for p in paths:
        if p.stop_time < hor:
            raise RangeOverrunError("walk shorter than the requested horizon")
    all_pos = []
    vols = np.empty(len(paths), np.int64)
    diams = np.empty(len(paths), np.int64)
    for i, p in enumerate(paths):
        pos = p.positions()[: hor + 1]
        rng_sites = np.unique(pos, axis=0)
        vols[i] = len(rng_sites)
        diams[i] = (pos.max(axis=0) - pos.min(axis=0)).max()
        all_pos.append(rng_sites)
    cat = np.concatenate(all_pos, axis=0)
    lo = cat.min(axis=0)
    hi = cat.max(axis=0)
    pk = Packing(lo, hi - lo + 1)
    union = len(np.unique(pk.pack(cat)))
    return MultiRangeStats(
        volumes=vols,
        diameters=diams,
        union_volume=union,
        pairwise_disjoint=union == int(vols.sum()),
        horizon=hor,
        d=d,
    )


def sample_range_paths(k: int, steps: int, d: int, seed: int, starts=None) -> list[StoppedPath]:
    """k independent fixed-horizon walks, one stream per walk."""
    if starts is None:
        starts = np.zeros((k, d), np.int64)
    else:
        starts = as_points(starts)
        if len(starts) != k:
            raise ValueError("starts length mismatch")
    out = []
    for i in range(k):
        rng = stream(seed, i)
        codes = rng.integers(0, 2 * d, size=steps, dtype=np.uint8)
        out.append(StoppedPath(tuple(int(v) for v in starts[i]), codes, "capped", d))
    return out


# ------------------------------------------------------------- torus walk


def torus_trace(N: int, d: int, steps: int, rng: np.random.Generator, start=None) -> np.ndarray:
    """Visited-site indicator of a length-``steps`` walk on the side-N torus."""
    if N <= 0 or steps < 0:
        raise ValueError("bad torus parameters")
    if start is None:
        start = rng.integers(0, N, size=d)
    pos = np.asarray(start, np.int64) % N
    visited = np.zeros(N**d, bool)
    deltas = direction_deltas(d)
    weights = N ** np.arange(d - 1, -1, -1, dtype=np.int64)
    visited[int(pos @ weights)] = True
    done = 0
    while done < steps:
        n = int(min(_CHUNK * 8, steps - done))
        codes = rng.integers(0, 2 * d, size=n, dtype=np.uint8)
        block = np.cumsum(deltas[codes], axis=0)
        block += pos
        block %= N
        visited[block @ weights] = True
        pos = block[-1]
        done += n
    return visited.reshape((N,) * d)
