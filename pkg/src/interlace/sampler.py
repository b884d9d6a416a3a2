"""Poisson cloud of bidirectional walk trajectories through a window.

The trace of the cloud at level u, restricted to a finite window W, is
generated exactly from its entrance description: the number of
trajectories is Poisson(u * cap(W)), each enters at a site drawn from
the normalized equilibrium measure of W, and then runs as an
unconditioned walk.  Walks are truncated at a kill sphere; the induced
thinning of the trace is certified by an attached bias budget instead of
being ignored.

Trajectory labels are uniform on [0, u], so the field restricted to any
lower level u' is obtained by dropping trajectories with label above u'.
That coupling makes level comparisons monotone path by path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numba
import numpy as np

from .chemdist import SiteSet
from .equilibrium import EquilibriumSolution, equilibrium
from .errors import (
    EmptySetError,
    FieldFormatError,
    KillBudgetError,
    NotInSetError,
    OutOfRangeError,
)
from .green import GreenTable, sphere_green_max
from .lattice import Box, Domain, Packing, as_points, box_domain, max_distance, sausage
from .rng import stream
from .walk import direction_deltas, hit_before_escape

__all__ = [
    "Trajectory",
    "EquilibriumSampler",
    "sample_count",
    "OccupancyField",
    "sample_field",
    "VacancyResult",
    "vacancy_check",
    "SliceCounts",
    "slice_start_counts",
]

PAIR_BUDGET = 50_000_000
SITE_TRAJ_CAP = 15

_MAGIC = b"ILFD"
_VERSION = 1
_STOP_CODES = {"killed": 0, "capped": 1, "horizon": 2}
_STOP_NAMES = {v: k for k, v in _STOP_CODES.items()}


@dataclass
class Trajectory:
    """One sampled trajectory: entrance site, step codes, level label."""

    start: tuple[int, ...]
    codes: np.ndarray
    label: float
    stop_kind: str


class EquilibriumSampler:
    """Draws entrance sites from a normalized equilibrium measure.

    Standard two-array alias method, so a draw costs one integer and one
    uniform regardless of support size.
    """

    def __init__(self, solution: EquilibriumSolution):
        w = np.asarray(solution.weights, float)
        total = float(w.sum())
        if not total > 0:
            raise EmptySetError("equilibrium measure has no mass")
        self.solution = solution
        self.sites = solution.sites
        self.capacity = solution.capacity
        m = len(w)
        scaled = w * (m / total)
        self._alias = np.zeros(m, np.int64)
        self._prob = np.ones(m)
        small = [i for i in range(m) if scaled[i] < 1.0]
        large = [i for i in range(m) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            self._prob[s] = scaled[s]
            self._alias[s] = g
            scaled[g] = scaled[g] - (1.0 - scaled[s])
            (small if scaled[g] < 1.0 else large).append(g)

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cell = rng.integers(0, len(self._prob), size=size)
        toss = rng.random(size)
        return np.where(toss < self._prob[cell], cell, self._alias[cell])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sites[self.sample_indices(rng, size)]


def sample_count(u: float, capacity: float, rng: np.random.Generator) -> int:
    """Number of trajectories meeting the window at level u."""
    if u < 0 or capacity < 0:
        raise OutOfRangeError("level and capacity must be nonnegative")
    return int(rng.poisson(u * capacity))


def _as_domain(window) -> Domain:
    if isinstance(window, Domain):
        return window
    if isinstance(window, Box):
        return Domain((window,))
    raise ValueError("window must be a Domain or a Box")


def _kill_radius_for(capacity: float, reach: int, eps: float, d: int) -> int:
    """Smallest integer radius whose escape-to-return bound is below eps."""
    if not 0 < eps < 1:
        raise OutOfRangeError("per-trajectory bias target must lie in (0, 1)")

    def bound(radius: int) -> float:
        return capacity * sphere_green_max(radius - reach, d)

    lo = reach + 2
    hi = lo
    while bound(hi) > eps:
        hi *= 2
        if hi > 1 << 26:
            raise KillBudgetError(
                f"kill radius above {1 << 26} needed for per-trajectory bias {eps:g}"
            )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) > eps:
            lo = mid
        else:
            hi = mid
    return hi


class OccupancyField:
    """Trace of a sampled trajectory cloud inside a window.

    Keeps every trajectory sampled at the top level together with the
    deduplicated (site key, trajectory) incidence pairs, so restricting
    to a lower level is a filter, not a resample.  Per-site trajectory
    lists are capped; a site over the cap is marked saturated.
    """

    def __init__(
        self,
        *,
        d: int,
        u: float,
        window: Domain,
        sample_window: Domain,
        packing: Packing,
        trajectories: list[Trajectory],
        pair_keys: np.ndarray,
        pair_traj: np.ndarray,
        seed: int,
        replica: int,
        kill_center: np.ndarray,
        kill_radius: int | None,
        per_traj_bias: float,
        level: float | None = None,
    ):
        self.d = d
        self.u = u
        self.level = u if level is None else level
        self.window = window
        self.sample_window = sample_window
        self.packing = packing
        self.trajectories = trajectories
        self.labels = np.array([t.label for t in trajectories])
        self.pair_keys = pair_keys
        self.pair_traj = pair_traj
        self.seed = seed
        self.replica = replica
        self.kill_center = np.asarray(kill_center, np.int64)
        self.kill_radius = kill_radius
        self.per_traj_bias = per_traj_bias
        self._rebuild()

    def _rebuild(self):
        self.active = self.labels <= self.level
        if len(self.pair_keys):
            mask = self.active[self.pair_traj]
            keys = self.pair_keys[mask]
            traj = self.pair_traj[mask]
        else:
            keys = self.pair_keys
            traj = self.pair_traj
        uniq, first = np.unique(keys, return_index=True)
        counts = np.diff(np.r_[first, len(keys)])
        self.keys = uniq
        self.saturated = counts > SITE_TRAJ_CAP
        take = np.minimum(counts, SITE_TRAJ_CAP)
        self.list_offsets = np.r_[0, np.cumsum(take)]
        base = np.repeat(first, take)
        within = np.arange(int(take.sum())) - np.repeat(self.list_offsets[:-1], take)
        self.list_values = traj[base + within] if len(base) else traj[:0]
        edge = self.packing.pack(self.sample_window.boundary())
        self.edge_keys = np.intersect1d(self.keys, edge)

    # ------------------------------------------------------------ queries

    @property
    def active_count(self) -> int:
        return int(self.active.sum())

    @property
    def capped_count(self) -> int:
        return sum(
            1 for t, a in zip(self.trajectories, self.active) if a and t.stop_kind == "capped"
        )

    @property
    def bias_budget(self) -> float:
        """Upper bound on the expected number of active trajectories whose
        truncated tail could have revisited the sample window."""
        return self.active_count * self.per_traj_bias + self.capped_count

    @property
    def scan_window(self) -> Domain:
        return self.sample_window

    def occupied(self, pts) -> np.ndarray:
        pts = as_points(pts)
        out = np.zeros(len(pts), bool)
        if not len(self.keys):
            return out
        ok = self.sample_window.contains(pts)
        if ok.any():
            kk = self.packing.pack(pts[ok])
            idx = np.clip(np.searchsorted(self.keys, kk), 0, len(self.keys) - 1)
            out[ok] = self.keys[idx] == kk
        return out

    def sites(self) -> np.ndarray:
        return self.packing.unpack(self.keys)

    def site_set(self) -> SiteSet:
        ss = SiteSet.__new__(SiteSet)
        ss.packing = self.packing
        ss.d = self.d
        ss.keys = self.keys
        ss.edge_keys = self.edge_keys
        return ss

    def trajectories_at(self, x) -> tuple[np.ndarray, bool]:
        """(trajectory indices through site x, saturation flag)."""
        pts = as_points(x)
        if not self.occupied(pts)[0]:
            raise NotInSetError(f"site {tuple(int(v) for v in pts[0])} not occupied")
        i = int(np.searchsorted(self.keys, self.packing.pack(pts)[0]))
        lo, hi = self.list_offsets[i], self.list_offsets[i + 1]
        return self.list_values[lo:hi].copy(), bool(self.saturated[i])

    def at_level(self, u: float) -> "OccupancyField":
        """The same cloud thinned to level u <= the sampled level."""
        if not 0 <= u <= self.u + 1e-12:
            raise OutOfRangeError(f"level {u} outside [0, {self.u}]")
        return OccupancyField(
            d=self.d,
            u=self.u,
            window=self.window,
            sample_window=self.sample_window,
            packing=self.packing,
            trajectories=self.trajectories,
            pair_keys=self.pair_keys,
            pair_traj=self.pair_traj,
            seed=self.seed,
            replica=self.replica,
            kill_center=self.kill_center,
            kill_radius=self.kill_radius,
            per_traj_bias=self.per_traj_bias,
            level=u,
        )

    # ------------------------------------------------------ serialization

    def to_bytes(self) -> bytes:
        head = [_MAGIC, struct.pack("<HH", _VERSION, self.d)]
        head.append(
            struct.pack(
                "<dQQqdI",
                self.u,
                self.seed,
                self.replica,
                -1 if self.kill_radius is None else self.kill_radius,
                self.per_traj_bias,
                self.capped_count,
            )
        )
        head.append(self.kill_center.astype("<i8").tobytes())

        def eat_domain(dom: Domain):
            part = [struct.pack("<I", len(dom.boxes))]
            for b in dom.boxes:
                part.append(np.asarray(b.lo, "<i8").tobytes())
                part.append(np.asarray(b.hi, "<i8").tobytes())
            return b"".join(part)

        head.append(eat_domain(self.window))
        head.append(eat_domain(self.sample_window))
        head.append(struct.pack("<Q", len(self.trajectories)))
        for t in self.trajectories:
            head.append(np.asarray(t.start, "<i8").tobytes())
            head.append(struct.pack("<dBQ", t.label, _STOP_CODES[t.stop_kind], len(t.codes)))
            head.append(t.codes.tobytes())
        order = np.lexsort((self.pair_traj, self.pair_keys))
        pairs = np.empty((len(self.pair_keys), 2), "<i8")
        pairs[:, 0] = self.pair_keys[order]
        pairs[:, 1] = self.pair_traj[order]
        head.append(struct.pack("<Q", len(pairs)))
        head.append(pairs.tobytes())
        return b"".join(head)

    def write(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "OccupancyField":
        view = memoryview(blob)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise FieldFormatError("field blob truncated")
            out = view[pos : pos + n]
            pos += n
            return out

        if bytes(take(4)) != _MAGIC:
            raise FieldFormatError("bad field magic")
        version, d = struct.unpack("<HH", take(4))
        if version != _VERSION:
            raise FieldFormatError(f"unsupported field version {version}")
        u, seed, replica, kill_radius, per_traj_bias, _capped = struct.unpack(
            "<dQQqdI", take(struct.calcsize("<dQQqdI"))
        )
        center = np.frombuffer(take(8 * d), "<i8").astype(np.int64)

        def read_domain():
            (nb,) = struct.unpack("<I", take(4))
            boxes = []
            for _ in range(nb):
                lo = np.frombuffer(take(8 * d), "<i8")
                hi = np.frombuffer(take(8 * d), "<i8")
                boxes.append(Box(tuple(int(v) for v in lo), tuple(int(v) for v in hi)))
            return Domain(boxes)

        window = read_domain()
        sample_window = read_domain()
        (n_traj,) = struct.unpack("<Q", take(8))
        trajectories = []
        for _ in range(n_traj):
            start = tuple(int(v) for v in np.frombuffer(take(8 * d), "<i8"))
            label, stop, n_codes = struct.unpack("<dBQ", take(struct.calcsize("<dBQ")))
            if stop not in _STOP_NAMES:
                raise FieldFormatError(f"unknown stop code {stop}")
            codes = np.frombuffer(take(n_codes), np.uint8).copy()
            if len(codes) and codes.max() >= 2 * d:
                raise FieldFormatError("step code out of range for dimension")
            trajectories.append(Trajectory(start, codes, label, _STOP_NAMES[stop]))
        (n_pairs,) = struct.unpack("<Q", take(8))
        pairs = np.frombuffer(take(16 * n_pairs), "<i8").astype(np.int64).reshape(-1, 2)
        if pos != len(view):
            raise FieldFormatError("trailing bytes after field payload")
        packing = Packing.for_box(sample_window.bounding_box(), margin=1)
        return cls(
            d=d,
            u=u,
            window=window,
            sample_window=sample_window,
            packing=packing,
            trajectories=trajectories,
            pair_keys=pairs[:, 0].copy(),
            pair_traj=pairs[:, 1].copy(),
            seed=seed,
            replica=replica,
            kill_center=center,
            kill_radius=None if kill_radius < 0 else int(kill_radius),
            per_traj_bias=per_traj_bias,
        )

    @classmethod
    def read(cls, path) -> "OccupancyField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@numba.njit(cache=True, nogil=True)
def _record_steps(pos, codes, deltas, center, kill_radius, blo, bhi, pack_lo, strides, keys_out):
    """Advance pos through codes, recording packed keys of in-window sites.

    Returns (steps used, killed flag, number of keys written).  The kill
    step is counted as used; the exit site lies outside the window so it
    is never recorded.
    """
    d = pos.shape[0]
    nb = blo.shape[0]
    nk = 0
    used = 0
    killed = False
    for t in range(codes.shape[0]):
        c = codes[t]
        for j in range(d):
            pos[j] += deltas[c, j]
        used += 1
        if kill_radius >= 0:
            m = 0
            for j in range(d):
                a = pos[j] - center[j]
                if a < 0:
                    a = -a
                if a > m:
                    m = a
            if m > kill_radius:
                killed = True
                break
        inside = False
        for b in range(nb):
            ok = True
            for j in range(d):
                if pos[j] < blo[b, j] or pos[j] > bhi[b, j]:
                    ok = False
                    break
            if ok:
                inside = True
                break
        if inside:
            k = 0
            for j in range(d):
                k += (pos[j] - pack_lo[j]) * strides[j]
            keys_out[nk] = k
            nk += 1
    return used, killed, nk


def _block_schedule(time_cap: int, first: int = 8192, top: int = 1 << 22):
    """Deterministic growing block sizes covering time_cap steps."""
    t = 0
    n = first
    while t < time_cap:
        yield min(n, time_cap - t)
        t += min(n, time_cap - t)
        n = min(n * 4, top)


_EQ_CACHE: dict[tuple, EquilibriumSolution] = {}


def _window_equilibrium(dom: Domain, table: GreenTable | None) -> EquilibriumSolution:
    key = (tuple((b.lo, b.hi) for b in dom.boxes), table.d if table else None)
    sol = _EQ_CACHE.get(key)
    if sol is None:
        sol = equilibrium(dom, table=table)
        if len(_EQ_CACHE) > 32:
            _EQ_CACHE.clear()
        _EQ_CACHE[key] = sol
    return sol


def sample_field(
    window,
    u: float,
    *,
    seed: int,
    replica: int = 0,
    table: GreenTable | None = None,
    eq: EquilibriumSolution | None = None,
    enlarge: float = 0.5,
    sample_window=None,
    kill_radius: int | None = None,
    kill_eps: float | None = None,
    kill_scale: float = 3.0,
    horizon: int | None = None,
    block: int = 8192,
    rng_path: tuple[int, ...] = (),
) -> OccupancyField:
    """Sample the trace of the trajectory cloud at level u over a window.

    Sites are recorded inside ``sample_window`` (by default the window
    inflated by ``enlarge``), whose boundary supplies the truncation
    flags for distance searches.  Walk truncation: ``horizon`` runs every
    trajectory exactly that many steps and disables killing, otherwise a
    kill sphere is used, sized by ``kill_radius``, by the per-trajectory
    bias target ``kill_eps``, or as ``kill_scale`` times the window span.
    The resulting per-trajectory return bound is attached to the field.
    """
    core = _as_domain(window)
    sample_dom = _as_domain(sample_window) if sample_window is not None else core.inflate(enlarge)
    if not sample_dom.contains(core.boundary()).all():
        raise OutOfRangeError("sample window must contain the core window")
    d = core.bounding_box().dim
    if table is None:
        table = GreenTable(d)
    if eq is None:
        eq = _window_equilibrium(sample_dom, table)
    sampler = EquilibriumSampler(eq)

    bb = sample_dom.bounding_box()
    packing = Packing.for_box(bb, margin=1)
    center = np.asarray(bb.lo, np.int64) + np.asarray(bb.shape, np.int64) // 2
    reach = int(max_distance(center, eq.sites, "linf"))
    span = int(max(np.asarray(bb.shape, np.int64)))

    if horizon is not None:
        if horizon < 1:
            raise OutOfRangeError("horizon must be at least one step")
        kill_radius = None
        per_traj_bias = 0.0  # fixed-horizon prefixes are exact by definition
        time_cap = int(horizon)
    else:
        if kill_radius is None:
            if kill_eps is not None:
                kill_radius = _kill_radius_for(eq.capacity, reach, kill_eps, d)
            else:
                kill_radius = int(np.ceil(kill_scale * span))
        if kill_radius <= reach + 1:
            raise OutOfRangeError("kill radius must clear the sample window")
        per_traj_bias = min(1.0, eq.capacity * sphere_green_max(kill_radius - reach, d))
        time_cap = max(4096, int(12 * kill_radius * kill_radius))

    rep_rng = stream(seed, *rng_path, replica, 0)
    n_traj = sample_count(u, eq.capacity, rep_rng)
    labels = rep_rng.random(n_traj) * u
    start_idx = sampler.sample_indices(rep_rng, n_traj)
    starts = sampler.sites[start_idx]

    deltas = direction_deltas(d).astype(np.int64)
    blo = np.array([b.lo for b in sample_dom.boxes], np.int64)
    bhi = np.array([b.hi for b in sample_dom.boxes], np.int64)
    pack_lo = packing.lo.astype(np.int64)
    strides = packing.strides.astype(np.int64)
    kr = -1 if kill_radius is None else int(kill_radius)

    trajectories: list[Trajectory] = []
    key_parts: list[np.ndarray] = []
    traj_parts: list[np.ndarray] = []
    total_pairs = 0
    for i in range(n_traj):
        rng = stream(seed, *rng_path, replica, 1 + i)
        pos = starts[i].astype(np.int64)
        key_parts.append(packing.pack(pos[None, :]))
        traj_parts.append(np.full(1, i, np.int64))
        chunks = []
        stop = "horizon" if horizon is not None else "capped"
        for n in _block_schedule(time_cap, first=block):
            codes = rng.integers(0, 2 * d, size=n, dtype=np.uint8)
            keys_out = np.empty(n, np.int64)
            used, killed, nk = _record_steps(
                pos, codes, deltas, center, kr, blo, bhi, pack_lo, strides, keys_out
            )
            if nk:
                key_parts.append(keys_out[:nk].copy())
                traj_parts.append(np.full(nk, i, np.int64))
                total_pairs += nk
                if total_pairs > PAIR_BUDGET:
                    raise OutOfRangeError("recorded occupancy pairs over memory budget")
            chunks.append(codes[:used])
            if killed:
                stop = "killed"
                break
        trajectories.append(
            Trajectory(
                tuple(int(v) for v in starts[i]),
                np.concatenate(chunks) if chunks else np.empty(0, np.uint8),
                float(labels[i]),
                stop,
            )
        )

    if key_parts:
        keys = np.concatenate(key_parts)
        traj = np.concatenate(traj_parts)
        order = np.lexsort((traj, keys))
        keys = keys[order]
        traj = traj[order]
        dup = np.r_[False, (keys[1:] == keys[:-1]) & (traj[1:] == traj[:-1])]
        keys = keys[~dup]
        traj = traj[~dup]
    else:
        keys = np.empty(0, np.int64)
        traj = np.empty(0, np.int64)

    return OccupancyField(
        d=d,
        u=u,
        window=core,
        sample_window=sample_dom,
        packing=packing,
        trajectories=trajectories,
        pair_keys=keys,
        pair_traj=traj,
        seed=seed,
        replica=replica,
        kill_center=center,
        kill_radius=kill_radius,
        per_traj_bias=per_traj_bias,
    )


# ------------------------------------------------------------- vacancy


def vacancy_replica(
    target: np.ndarray,
    smp: EquilibriumSampler,
    center: np.ndarray,
    radius: int,
    u: float,
    seed: int,
    *path: int,
) -> tuple[bool, int]:
    """One replica of the vacancy indicator for a target set.

    Samples the cloud through the window behind ``smp`` and reports
    (no trajectory hit the target, trajectory count).  ``path`` picks the
    replica's position in the stream tree; draws follow the same layout
    as sample_field so counts and entrances match the field sampler.
    """
    rep_rng = stream(seed, *path, 0)
    n_traj = sample_count(u, smp.capacity, rep_rng)
    rep_rng.random(n_traj)  # labels drawn to keep the stream layout shared
    starts = smp.sample(rep_rng, n_traj)
    for i in range(n_traj):
        rng = stream(seed, *path, 1 + i)
        hit, _ = hit_before_escape(starts[i], target, center, radius, rng, from_time=0)
        if hit:
            return False, n_traj
    return True, n_traj


@dataclass
class VacancyResult:
    """Observed vacancy frequency of a set against its predicted value."""

    vacant_freq: float
    expected: float
    stderr: float
    bias_budget: float  # expected count of killed tails that could have hit the set
    replicas: int
    trajectories: int
    kill_radius: int


def vacancy_check(
    A,
    window,
    u: float,
    replicas: int,
    *,
    seed: int,
    table: GreenTable | None = None,
    bias_target: float = 5e-3,
) -> VacancyResult:
    """Estimate P[A untouched at level u] and compare with exp(-u cap(A)).

    Trajectories are sampled through the window (which must contain A),
    and each is monitored for hitting A until it leaves the kill sphere.
    The sphere is sized so the expected number of killed tails that could
    still have hit A stays below bias_target; vacancy is overestimated by
    at most that amount.
    """
    W = _as_domain(window)
    target = A.sites() if isinstance(A, Domain) else as_points(A)
    if not W.contains(target).all():
        raise NotInSetError("the checked set must lie inside the sampling window")
    d = target.shape[1]
    if table is None:
        table = GreenTable(d)
    eq = _window_equilibrium(W, table)
    sampler = EquilibriumSampler(eq)
    cap_A = equilibrium(target, table=table).capacity
    expected = float(np.exp(-u * cap_A))

    bb = W.bounding_box()
    center = np.asarray(bb.lo, np.int64) + np.asarray(bb.shape, np.int64) // 2
    reach = int(max_distance(center, target, "linf"))
    mean_traj = u * eq.capacity
    per_needed = bias_target / max(mean_traj, 1e-12)
    if per_needed >= 1:
        per_needed = 0.5
    radius = _kill_radius_for(cap_A, reach, per_needed, d)
    per_traj = cap_A * sphere_green_max(radius - reach, d)

    vacant = 0
    total = 0
    for r in range(replicas):
        ok, n_traj = vacancy_replica(target, sampler, center, radius, u, seed, r)
        vacant += ok
        total += n_traj
    freq = vacant / replicas
    stderr = float(np.sqrt(max(freq * (1.0 - freq), 1e-12) / replicas))
    return VacancyResult(
        vacant_freq=freq,
        expected=expected,
        stderr=stderr,
        bias_budget=float(mean_traj * per_traj),
        replicas=replicas,
        trajectories=total,
        kill_radius=radius,
    )


# ------------------------------------------------------ sausage entrances


@dataclass
class SliceCounts:
    """Entrance counts per thickness slice of the axis sausage."""

    counts: np.ndarray  # (replicas, slices)
    masses: np.ndarray  # equilibrium mass per slice
    capacity: float
    slice_radius: int


def slice_start_counts(
    n: int,
    a: float,
    d: int,
    u: float,
    replicas: int,
    *,
    seed: int,
    table: GreenTable | None = None,
) -> SliceCounts:
    """Sample entrance sites of the cloud over the axis sausage and count
    how many land in each thickness slice; the counts are Poisson with
    mean u times the slice's equilibrium mass."""
    G = sausage(n, a, d)
    if table is None:
        table = GreenTable(d)
    eq = _window_equilibrium(G, table)
    sampler = EquilibriumSampler(eq)
    r = int(np.floor(n**a))
    n_slices = int(np.floor(n / max(n**a, 1.0))) + 1
    centers = np.zeros((n_slices, d), np.int64)
    centers[:, 0] = np.floor(np.arange(n_slices) * n**a).astype(np.int64)

    masses = np.empty(n_slices)
    for k in range(n_slices):
        inside = np.abs(eq.sites - centers[k]).max(axis=1) <= r
        masses[k] = float(eq.weights[inside].sum())

    counts = np.zeros((replicas, n_slices), np.int64)
    for rep in range(replicas):
        rng = stream(seed, rep, 0)
        m = sample_count(u, eq.capacity, rng)
        rng.random(m)
        starts = sampler.sample(rng, m)
        for k in range(n_slices):
            counts[rep, k] = int((np.abs(starts - centers[k]).max(axis=1) <= r).sum())
    return SliceCounts(counts=counts, masses=masses, capacity=eq.capacity, slice_radius=r)
