"""Hitting probabilities of finite sets: exact values and certified bounds.

The exact infinite-horizon value comes from the last-exit identity
P_x[ever hit A] = sum_z g(x, z) e_A(z); the finite-horizon value from a
dense absorbing dynamic program on the reachable box.  The bounds are the
stopped-Green sandwich plus the geometric lower-bound shape factors
(diameter over reach, and volume over reach) whose unknown constants are
only ever tested as ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .equilibrium import EquilibriumSolution, equilibrium
from .errors import ChainBudgetError, EmptySetError, NotConnectedError, NotInSetError
from .green import GreenTable, green_stopped
from .lattice import Domain, as_points, is_connected_sites, max_distance

__all__ = [
    "hit_prob_exact",
    "hit_prob_chain",
    "HitBounds",
    "hit_sandwich",
    "hit_lower_diam",
    "hit_lower_volume",
]

GRID_BUDGET = 3_000_000


def _set_sites(A) -> np.ndarray:
    pts = A.sites() if isinstance(A, Domain) else as_points(A)
    if not len(pts):
        raise EmptySetError("hitting set is empty")
    return pts


def hit_prob_exact(
    x,
    A,
    n: int | None = None,
    table: GreenTable | None = None,
    eq: EquilibriumSolution | None = None,
) -> tuple[float, float]:
    """P_x[walk enters A by time n] with a certified error bound.

    Returns (value, error_bound).  The infinite-horizon value is
    sum_z g(x, z) e_A(z); its error is at most the equilibrium residual
    because the defect is averaged against the hitting distribution,
    which has total mass <= 1.  Finite n runs an exact absorbing DP over
    the reachable box (error 0 up to rounding).
    """
    pts = _set_sites(A)
    xa = np.asarray(x, np.int64)
    d = pts.shape[1]
    if n is not None:
        return _hit_dp(xa, pts, n, d), 0.0
    on_set = np.all(pts == xa, axis=1).any()
    if on_set:
        return 1.0, 0.0
    if eq is None:
        eq = equilibrium(pts, table=table)
    if table is None:
        table = GreenTable(d)
    gx = table.values(eq.sites - xa)
    return float(gx @ eq.weights), eq.residual


def _hit_dp(x: np.ndarray, pts: np.ndarray, n: int, d: int) -> float:
    if n < 0:
        raise ValueError("horizon must be >= 0")
    shape = (2 * n + 1,) * d
    cells = 1
    for s in shape:
        cells *= s
    if cells > GRID_BUDGET:
        raise ChainBudgetError(f"absorbing DP grid of {cells} cells over budget")
    P = np.zeros(shape)
    P[(n,) * d] = 1.0  # walker sits at the grid center
    rel = pts - x + n
    inside = np.all((rel >= 0) & (rel <= 2 * n), axis=1)
    aidx = tuple(rel[inside].T)
    absorbed = 0.0
    for t in range(n + 1):
        if len(aidx[0]):
            absorbed += P[aidx].sum()
            P[aidx] = 0.0
        if t == n:
            break
        new = np.zeros_like(P)
        for ax in range(d):
            src = [slice(None)] * d
            dst = [slice(None)] * d
            src[ax] = slice(0, 2 * n)
            dst[ax] = slice(1, 2 * n + 1)
            new[tuple(dst)] += P[tuple(src)]
            new[tuple(src)] += P[tuple(dst)]
        P = new / (2 * d)
    return float(absorbed)


def hit_prob_chain(x, A, radius: int, table: GreenTable | None = None) -> float:
    """Infinite-horizon hitting probability via an absorbing-chain solve.

    Harmonic on B(center, radius) minus the set, 1 on the set, pinned on
    the sphere to the last-exit values.  Agreeing with ``hit_prob_exact``
    validates solver and Green table against plain harmonicity.
    """
    pts = _set_sites(A)
    d = pts.shape[1]
    if table is None:
        table = GreenTable(d)
    eq = equilibrium(pts, table=table)
    center = np.round((pts.min(axis=0) + pts.max(axis=0)) / 2).astype(np.int64)
    xa = np.asarray(x, np.int64)
    if np.abs(xa - center).max() > radius:
        raise ChainBudgetError("start outside the chain ball")
    axes = [np.arange(c - radius, c + radius + 1) for c in center]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    cells = len(grid)
    if cells > GRID_BUDGET:
        raise ChainBudgetError(f"chain ball of {cells} cells over budget")
    shape = (2 * radius + 1,) * d
    strides = np.ones(d, np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    flat = ((grid - (center - radius)) * strides).sum(axis=1)

    kind = np.zeros(cells, np.int8)  # 0 interior, 1 set, 2 sphere
    rel = pts - (center - radius)
    kind[(rel * strides).sum(axis=1)] = 1
    on_sphere = np.abs(grid - center).max(axis=1) == radius
    kind[on_sphere & (kind == 0)] = 2

    dirichlet = np.zeros(cells)
    dirichlet[kind == 1] = 1.0
    sphere_idx = np.nonzero(kind == 2)[0]
    gvals = table.pairwise(grid[sphere_idx], eq.sites) @ eq.weights
    dirichlet[sphere_idx] = gvals

    free = np.nonzero(kind == 0)[0]
    col_of = -np.ones(cells, np.int64)
    col_of[free] = np.arange(len(free))
    rows, cols, vals = [], [], []
    rhs = np.zeros(len(free))
    for ax in range(d):
        for sg in (1, -1):
            nb = free + sg * strides[ax]
            coeff = 1.0 / (2 * d)
            is_free = kind[nb] == 0
            rows.extend(np.arange(len(free))[is_free])
            cols.extend(col_of[nb[is_free]])
            vals.extend([-coeff] * int(is_free.sum()))
            rhs[~is_free] += coeff * dirichlet[nb[~is_free]]
    rows.extend(range(len(free)))
    cols.extend(range(len(free)))
    vals.extend([1.0] * len(free))
    L = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
    h_free = scipy.sparse.linalg.spsolve(L, rhs)
    h = dirichlet.copy()
    h[free] = h_free
    xflat = int(((xa - (center - radius)) * strides).sum())
    return float(h[xflat])


@dataclass
class HitBounds:
    lower: float
    upper: float
    horizon: int | None


def hit_sandwich(x, A, n: int | None = None, table: GreenTable | None = None) -> HitBounds:
    """Stopped-Green sandwich on the hitting probability of A from x.

    lower: g(x, A; n) / max_y g(y, A; n); upper: g(x, A) / min_y g(y, A).
    n=None uses the infinite-horizon Green in the lower bound as well.
    """
    pts = _set_sites(A)
    d = pts.shape[1]
    xa = np.asarray(x, np.int64)
    if table is None:
        table = GreenTable(d)
    g_full = table.pairwise(pts, pts).sum(axis=1)
    gx_full = float(table.values(pts - xa).sum())
    upper = gx_full / float(g_full.min())
    if n is None:
        lower = gx_full / float(g_full.max())
    else:
        gx_n = sum(green_stopped(xa, z, n) for z in pts)
        gy_n = np.array([sum(green_stopped(y, z, n) for z in pts) for y in pts])
        lower = gx_n / float(gy_n.max())
    return HitBounds(lower=lower, upper=min(upper, 1.0), horizon=n)


def _reach(x, pts) -> int:
    return int(max_distance(np.asarray(x, np.int64), pts, "linf"))


def hit_lower_diam(x, A, n: int) -> float:
    """Diameter-based lower-bound shape factor for the hitting probability.

    Valid for a connected set of >= 2 sites and horizons n >= reach^2;
    the universal constant in front is deliberately not included, so
    callers compare ratios, never absolute values.  Shape:
    diam / (reach ln diam) in d=3 and diam / reach^(d-2) above.
    """
    pts = _set_sites(A)
    d = pts.shape[1]
    if len(pts) < 2:
        raise EmptySetError("diameter bound needs at least two sites")
    if not is_connected_sites(pts):
        raise NotConnectedError("diameter bound needs a connected set")
    ell = _reach(x, pts)
    if n < ell * ell:
        raise ValueError(f"horizon {n} below reach^2 = {ell * ell}")
    diam = int((pts.max(axis=0) - pts.min(axis=0)).max())
    if d == 3:
        return diam / (ell * np.log(max(diam, 2)))
    return diam / ell ** (d - 2)


def hit_lower_volume(x, A, n: int) -> float:
    """Volume-based lower-bound shape factor: |A|^(1 - 2/d) / reach^(d-2)."""
    pts = _set_sites(A)
    d = pts.shape[1]
    ell = _reach(x, pts)
    if n < ell * ell:
        raise ValueError(f"horizon {n} below reach^2 = {ell * ell}")
    return len(pts) ** (1.0 - 2.0 / d) / ell ** (d - 2)
