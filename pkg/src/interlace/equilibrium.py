"""Equilibrium measure and capacity of finite sets.

The defining linear system is the last-exit identity: for every x in A,
sum_z g(x, z) e_A(z) = 1, with e_A supported on the internal boundary
(a site whose neighbors all stay in A returns immediately, so its weight
is zero).  Sets are solved on that support, after collapsing it to orbits
of the lattice symmetries that fix the set; for a centered box this cuts
the unknown count by the full order of the hyperoctahedral group.

``capacity_mc`` estimates the same quantity from escape frequencies of
killed walks, which is what makes the solver falsifiable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    EmptySetError,
    NegativeMassError,
    OutOfRangeError,
    SolveFailedError,
)
from .green import GreenTable, sphere_green_max
from .lattice import Domain, Packing, as_points, max_distance, sausage
from .rng import stream
from .walk import hit_before_escape

__all__ = [
    "EquilibriumSolution",
    "equilibrium",
    "capacity_of",
    "equilibrium_slice_mass",
    "CapacityEstimate",
    "capacity_mc",
]

SUPPORT_BUDGET = 150_000
ORBIT_BUDGET = 6_000


@dataclass
class EquilibriumSolution:
    """Equilibrium weights on the support of a finite set."""

    sites: np.ndarray  # (m, d) support sites
    weights: np.ndarray  # (m,) e_A values, one per site
    capacity: float
    residual: float  # max |sum_z g(x,z) e(z) - 1| over verification rows
    orbit_count: int

    @property
    def d(self) -> int:
        return self.sites.shape[1]

    def weight_of(self, x) -> float:
        pts = self.sites
        hit = np.all(pts == np.asarray(x, np.int64), axis=1)
        return float(self.weights[hit][0]) if hit.any() else 0.0


def _support_sites(A) -> tuple[np.ndarray, object]:
    """Internal boundary of the set plus a membership closure for checks."""
    if isinstance(A, Domain):
        return A.boundary(), A
    pts = as_points(A)
    if not len(pts):
        raise EmptySetError("equilibrium of empty set")
    lo = pts.min(axis=0)
    pk = Packing(lo, pts.max(axis=0) - lo + 1)
    keys = np.sort(pk.pack(pts))

    def member(q: np.ndarray) -> np.ndarray:
        out = np.zeros(len(q), bool)
        inside = np.all((q >= pk.lo + 1) & (q <= pk.lo + pk.shape - 2), axis=1)
        if inside.any():
            kk = pk.pack(q[inside])
            ii = np.clip(np.searchsorted(keys, kk), 0, len(keys) - 1)
            out[inside] = keys[ii] == kk
        return out

    has_out = np.zeros(len(pts), bool)
    d = pts.shape[1]
    for ax in range(d):
        for sg in (1, -1):
            nb = pts.copy()
            nb[:, ax] += sg
            has_out |= ~member(nb)
    return pts[has_out], member


def _signed_perms(d: int):
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield np.array(perm), np.array(signs, np.int64)


def _symmetry_orbits(support: np.ndarray, A) -> np.ndarray:
    """Orbit labels of the support under set-preserving signed permutations.

    Works in doubled coordinates about the bounding-box center so that
    half-integer centers stay exact.  Returns an int array mapping each
    support site to its orbit id; falls back to singletons when no
    symmetry beyond the identity survives.
    """
    d = support.shape[1]
    lo = support.min(axis=0)
    hi = support.max(axis=0)
    c2 = lo + hi  # twice the center
    y = 2 * support - c2
    pk = Packing(lo, hi - lo + 1)
    ref_keys = np.sort(pk.pack(support))

    if isinstance(A, Domain):
        box_set = {
            (tuple(2 * np.asarray(b.lo) - c2), tuple(2 * np.asarray(b.hi) - c2)) for b in A.boxes
        }

        def preserves_A(perm, signs):
            for blo, bhi in box_set:
                tl = np.asarray(blo)[perm] * signs
                th = np.asarray(bhi)[perm] * signs
                cand = (tuple(np.minimum(tl, th)), tuple(np.maximum(tl, th)))
                if cand not in box_set:
                    return False
            return True

    else:
        Apts = as_points(A)
        ya = 2 * Apts - c2
        alo = ya.min(axis=0)
        apk = Packing(alo, ya.max(axis=0) - alo + 1)
        akeys = np.sort(apk.pack(ya))

        def preserves_A(perm, signs):
            t = ya[:, perm] * signs
            try:
                tk = apk.pack(t)
            except OutOfRangeError:
                return False
            return np.array_equal(np.sort(tk), akeys)

    min_keys = pk.pack(support)
    for perm, signs in _signed_perms(d):
        if (perm == np.arange(d)).all() and (signs == 1).all():
            continue
        t = y[:, perm] * signs
        back = (t + c2) >> 1
        if ((t + c2) & 1).any():
            continue  # center offset incompatible with integer sites
        try:
            keys = pk.pack(back)
        except OutOfRangeError:
            continue
        if not np.array_equal(np.sort(keys), ref_keys):
            continue
        if not preserves_A(perm, signs):
            continue
        np.minimum(min_keys, keys, out=min_keys)
    _, labels = np.unique(min_keys, return_inverse=True)
    return labels


def equilibrium(
    A,
    d: int | None = None,
    table: GreenTable | None = None,
    use_symmetry: bool = True,
    budget: int = SUPPORT_BUDGET,
    orbit_budget: int = ORBIT_BUDGET,
    verify_rows: int = 48,
    seed: int = 0,
) -> EquilibriumSolution:
    """Solve for the equilibrium measure of a finite set (Domain or sites)."""
    support, member = _support_sites(A)
    if len(support) > budget:
        raise OutOfRangeError(f"equilibrium support of {len(support)} sites over solver budget {budget}")
    dd = support.shape[1]
    if table is None:
        table = GreenTable(dd)
    labels = (
        _symmetry_orbits(support, A) if use_symmetry else np.arange(len(support))
    )
    n_orb = int(labels.max()) + 1
    if n_orb > orbit_budget:
        raise OutOfRangeError(f"{n_orb} equilibrium unknowns over orbit budget {orbit_budget}")
    reps_idx = np.zeros(n_orb, np.int64)
    reps_idx[labels] = np.arange(len(support))
    reps = support[reps_idx]

    # collapse columns orbit by orbit without materializing the full
    # (support x orbit) indicator: sort columns, sum contiguous segments
    order = np.argsort(labels, kind="stable")
    col_sorted = support[order]
    seg = np.nonzero(np.r_[True, labels[order][1:] != labels[order][:-1]])[0]
    M = np.empty((n_orb, n_orb))
    row_block = max(8, int(4_000_000 // max(len(support), 1)))
    for s in range(0, n_orb, row_block):
        G_block = table.pairwise(reps[s : s + row_block], col_sorted)
        M[s : s + row_block] = np.add.reduceat(G_block, seg, axis=1)
    try:
        lu = scipy.linalg.lu_factor(M)
        e_orb = scipy.linalg.lu_solve(lu, np.ones(n_orb))
        # one step of iterative refinement
        r = np.ones(n_orb) - M @ e_orb
        e_orb += scipy.linalg.lu_solve(lu, r)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailedError(f"equilibrium solve failed: {exc}") from exc
    if not np.all(np.isfinite(e_orb)):
        raise SolveFailedError("equilibrium solve produced non-finite weights")

    weights = e_orb[labels]
    wmax = float(np.abs(weights).max())
    if weights.min() < -1e-8 * max(wmax, 1.0):
        raise NegativeMassError(f"negative equilibrium weight {weights.min():.3e}")
    weights = np.maximum(weights, 0.0)

    rng = stream(seed, 915)
    rows = min(verify_rows, len(support))
    pick = rng.choice(len(support), size=rows, replace=False)
    res = float(np.abs(table.pairwise(support[pick], support) @ weights - 1.0).max())
    if res > 1e-6:
        raise SolveFailedError(f"equilibrium residual {res:.2e} over 1e-6")

    return EquilibriumSolution(
        sites=support,
        weights=weights,
        capacity=float(weights.sum()),
        residual=res,
        orbit_count=n_orb,
    )


def capacity_of(A, **kw) -> float:
    return equilibrium(A, **kw).capacity


def equilibrium_slice_mass(n: int, a: float, d: int, k: int, table: GreenTable | None = None):
    """Equilibrium mass of the k-th thickness slice of the axis sausage.

    The sausage is the union of B(j e1, n^a), j = 0..n; slice k collects
    the support sites within sup-distance n^a of floor(k n^a) e1.
    Returns (mass, slice_count).
    """
    G = sausage(n, a, d)
    r = int(np.floor(n**a))
    count = int(np.floor(n / max(n**a, 1.0))) + 1
    if not 0 <= k < count:
        raise OutOfRangeError(f"slice index {k} outside 0..{count - 1}")
    sol = equilibrium(G, table=table)
    center = np.zeros(d, np.int64)
    center[0] = int(np.floor(k * n**a))
    inside = np.abs(sol.sites - center).max(axis=1) <= r
    return float(sol.weights[inside].sum()), count


# ------------------------------------------------------------- Monte Carlo


@dataclass
class CapacityEstimate:
    value: float
    stderr: float
    bias_bound: float  # upward bias from killing escapes at the ball
    escape_rate: float
    replicas: int
    kill_radius: int


def capacity_mc(
    A,
    replicas: int,
    kill_radius: int,
    seed: int,
    d: int | None = None,
    table: GreenTable | None = None,
) -> CapacityEstimate:
    """Estimate capacity from escape frequencies of killed walks.

    Starts are uniform over the support; a replica counts as escaped when
    the walk leaves B(center, kill_radius) without returning to the set.
    The reported bias bound is the killed-tail return probability
    sum-of-visits bound, scaled by the support size.
    """
    if isinstance(A, Domain):
        target = A.sites()
    else:
        target = as_points(A)
    support, _ = _support_sites(A)
    dd = support.shape[1]
    if table is None:
        table = GreenTable(dd)
    center = np.round((support.min(axis=0) + support.max(axis=0)) / 2).astype(np.int64)
    reach = int(max_distance(center, target, "linf"))
    if kill_radius <= reach + 1:
        raise OutOfRangeError("kill radius must clear the set by more than one site")

    esc = 0
    rng_pick = stream(seed, 0)
    starts = support[rng_pick.integers(0, len(support), size=replicas)]
    for i in range(replicas):
        rng = stream(seed, 1 + i)
        hit, _steps = hit_before_escape(starts[i], target, center, kill_radius, rng, from_time=1)
        esc += not hit
    p = esc / replicas
    scale = float(len(support))
    value = scale * p
    stderr = scale * float(np.sqrt(p * (1.0 - p) / replicas))

    # a killed escape could still have returned: bounded by the hitting
    # sandwich upper bound from the kill sphere
    g_far = sphere_green_max(kill_radius - reach, dd)
    g_self = table.pairwise(target, target) @ np.ones(len(target))
    q_back = len(target) * g_far / float(g_self.min())
    bias = scale * min(q_back, 1.0)
    return CapacityEstimate(
        value=value,
        stderr=stderr,
        bias_bound=bias,
        escape_rate=p,
        replicas=replicas,
        kill_radius=kill_radius,
    )
