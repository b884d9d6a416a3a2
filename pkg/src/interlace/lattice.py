"""Lattice geometry: points, norms, box-union domains, packing, torus wrap.

Sites are integer coordinate vectors, handled as python tuples at the API
surface and as int64 arrays of shape (n, d) internally.  Coordinates are
kept within +-2^40 so that every intermediate fits comfortably in int64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySetError, OutOfRangeError

COORD_LIMIT = 1 << 40

__all__ = [
    "COORD_LIMIT",
    "norm",
    "max_distance",
    "as_points",
    "Box",
    "Domain",
    "box_domain",
    "segment",
    "sausage",
    "Packing",
    "torus_wrap",
    "torus_distance",
]


def as_points(sites) -> np.ndarray:
    """Coerce one site or a collection of sites to an int64 (n, d) array."""
    a = np.asarray(sites, dtype=np.int64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected site array of shape (n, d), got {a.shape}")
    if a.size and np.abs(a).max() >= COORD_LIMIT:
        raise OutOfRangeError("coordinate exceeds +-2^40")
    return a


def norm(x, kind: str = "linf"):
    """Vector norm of one site or of each row of a site array.

    kind is one of 'l1', 'l2', 'linf'.
    """
    a = np.asarray(x, dtype=np.int64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if kind == "l1":
        out = np.abs(a).sum(axis=1)
    elif kind == "linf":
        out = np.abs(a).max(axis=1) if a.shape[1] else np.zeros(len(a), np.int64)
    elif kind == "l2":
        out = np.sqrt((a.astype(np.float64) ** 2).sum(axis=1))
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return out[0] if single else out


def max_distance(x, sites, kind: str = "linf"):
    """max over y in sites of ||x - y||, the reach of x over the set."""
    pts = as_points(sites)
    if not len(pts):
        raise EmptySetError("max_distance over empty site set")
    xa = np.asarray(x, dtype=np.int64)
    return norm(pts - xa[None, :], kind).max()


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with inclusive integer corners."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = np.asarray(self.lo, np.int64)
        hi = np.asarray(self.hi, np.int64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box corners must be equal-length vectors")
        if np.any(hi < lo):
            raise ValueError("box has hi < lo")
        if max(np.abs(lo).max(), np.abs(hi).max()) >= COORD_LIMIT:
            raise OutOfRangeError("box corner exceeds +-2^40")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(h - l + 1) for l, h in zip(self.lo, self.hi))

    def volume(self) -> int:
        v = 1
        for s in self.shape:
            v *= s
        return v

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo, np.int64)
        hi = np.asarray(self.hi, np.int64)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def sites(self) -> np.ndarray:
        grids = np.meshgrid(
            *(np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.lo, self.hi)),
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)


class Domain:
    """Finite union of boxes with vectorized membership tests."""

    def __init__(self, boxes):
        boxes = list(boxes)
        if not boxes:
            raise EmptySetError("Domain needs at least one box")
        dims = {b.dim for b in boxes}
        if len(dims) != 1:
            raise ValueError("boxes of mixed dimension")
        self.boxes: list[Box] = boxes
        self.dim = boxes[0].dim

    def __repr__(self):
        return f"Domain({len(self.boxes)} boxes, d={self.dim})"

    def contains(self, pts) -> np.ndarray:
        pts = as_points(pts)
        out = np.zeros(len(pts), dtype=bool)
        for b in self.boxes:
            out |= b.contains(pts)
        return out

    def contains_one(self, x) -> bool:
        return bool(self.contains(as_points(x))[0])

    def bounding_box(self) -> Box:
        lo = np.min([b.lo for b in self.boxes], axis=0)
        hi = np.max([b.hi for b in self.boxes], axis=0)
        return Box(tuple(int(v) for v in lo), tuple(int(v) for v in hi))

    def sites(self, budget: int = 50_000_000) -> np.ndarray:
        """All sites of the union, deduplicated, in packing order."""
        total = sum(b.volume() for b in self.boxes)
        if total > budget:
            raise OutOfRangeError(f"domain enumeration of {total} candidate sites over budget")
        pts = np.concatenate([b.sites() for b in self.boxes], axis=0)
        pk = Packing.for_box(self.bounding_box())
        keys = pk.pack(pts)
        _, idx = np.unique(keys, return_index=True)
        return pts[idx]

    def volume(self) -> int:
        return len(self.sites())

    def boundary(self) -> np.ndarray:
        """Internal boundary: sites of the union with a neighbor outside it."""
        shells = []
        for b in self.boxes:
            lo = np.asarray(b.lo, np.int64)
            hi = np.asarray(b.hi, np.int64)
            for ax in range(self.dim):
                for side_val in (lo[ax], hi[ax]):
                    l2, h2 = lo.copy(), hi.copy()
                    l2[ax] = h2[ax] = side_val
                    shells.append(Box(tuple(l2), tuple(h2)).sites())
        cand = np.concatenate(shells, axis=0)
        pk = Packing.for_box(self.bounding_box())
        _, idx = np.unique(pk.pack(cand), return_index=True)
        cand = cand[idx]
        has_out = np.zeros(len(cand), dtype=bool)
        for ax in range(self.dim):
            for sg in (1, -1):
                nb = cand.copy()
                nb[:, ax] += sg
                has_out |= ~self.contains(nb)
        out = cand[has_out]
        if not len(out):
            raise EmptySetError("domain has empty boundary")
        return out

    def center(self) -> np.ndarray:
        bb = self.bounding_box()
        return (np.asarray(bb.lo, np.float64) + np.asarray(bb.hi, np.float64)) / 2.0

    def inflate(self, lam: float) -> "Domain":
        """Enlarge every box by factor (1 + lam) about the union's center."""
        if lam < 0:
            raise ValueError("inflation factor must be >= 0")
        c = self.center()
        out = []
        for b in self.boxes:
            lo = np.floor(c + (1 + lam) * (np.asarray(b.lo, np.float64) - c))
            hi = np.ceil(c + (1 + lam) * (np.asarray(b.hi, np.float64) - c))
            out.append(Box(tuple(int(v) for v in lo), tuple(int(v) for v in hi)))
        return Domain(out)


def box_domain(center, radius: int, d: int | None = None) -> Domain:
    """The ball B(center, radius) in the sup norm, as a one-box Domain."""
    c = np.asarray(center, np.int64)
    if c.ndim == 0:
        if d is None:
            raise ValueError("scalar center needs explicit dimension")
        c = np.full(d, int(c), np.int64)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return Domain([Box(tuple(int(v) for v in c - radius), tuple(int(v) for v in c + radius))])


def segment(k: int, d: int) -> np.ndarray:
    """Axis segment {0, e1, 2 e1, ..., k e1} as a site array."""
    if k < 0:
        raise ValueError("segment length must be >= 0")
    pts = np.zeros((k + 1, d), np.int64)
    pts[:, 0] = np.arange(k + 1)
    return pts


def sausage(n: int, a: float, d: int) -> Domain:
    """Union of balls B(k e1, floor(n^a)) for k = 0..n along the first axis."""
    if not 0 < a < 1:
        raise ValueError("thickness exponent must lie in (0, 1)")
    r = int(np.floor(n ** a))
    boxes = []
    for k in range(n + 1):
        lo = [-r] * d
        hi = [r] * d
        lo[0] += k
        hi[0] += k
        boxes.append(Box(tuple(lo), tuple(hi)))
    return Domain(boxes)


class Packing:
    """Bijection between sites of a padded box and int64 keys.

    The box is padded by one site on every face so that key +- stride[ax]
    is always a valid distinct key; stepping off the true box lands on a
    never-occupied pad key instead of aliasing another row.
    """

    def __init__(self, lo, shape):
        self.lo = np.asarray(lo, np.int64) - 1
        self.shape = np.asarray(shape, np.int64) + 2
        strides = np.ones(len(self.shape), np.int64)
        for i in range(len(self.shape) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.shape[i + 1]
        total = strides[0] * self.shape[0]
        if total >= (1 << 62):
            raise OutOfRangeError("packed domain too large for int64 keys")
        self.strides = strides
        self.total = int(total)

    @classmethod
    def for_box(cls, box: Box, margin: int = 0) -> "Packing":
        lo = np.asarray(box.lo, np.int64) - margin
        shape = np.asarray(box.shape, np.int64) + 2 * margin
        return cls(lo, shape)

    def pack(self, pts: np.ndarray) -> np.ndarray:
        rel = np.asarray(pts, np.int64) - self.lo
        if rel.size and (rel.min() < 0 or np.any(rel.max(axis=0) >= self.shape)):
            raise OutOfRangeError("site outside packing window")
        return rel @ self.strides

    def unpack(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, np.int64)
        out = np.empty(keys.shape + (len(self.shape),), np.int64)
        rem = keys
        for i, s in enumerate(self.strides):
            out[..., i], rem = np.divmod(rem, s)
        return out + self.lo

    def neighbor_offsets(self) -> np.ndarray:
        """Key offsets of the 2d lattice neighbors."""
        return np.concatenate([self.strides, -self.strides])


def is_connected_sites(sites) -> bool:
    """Is the site set connected in the nearest-neighbor graph?"""
    pts = as_points(sites)
    if not len(pts):
        raise EmptySetError("connectivity of empty set")
    lo = pts.min(axis=0)
    pk = Packing(lo, pts.max(axis=0) - lo + 1)
    keys = np.sort(pk.pack(pts))
    offs = pk.neighbor_offsets()
    seen = np.zeros(len(keys), bool)
    frontier = keys[:1]
    seen[0] = True
    while len(frontier):
        nb = (frontier[:, None] + offs[None, :]).ravel()
        idx = np.searchsorted(keys, nb)
        idx_c = np.clip(idx, 0, len(keys) - 1)
        ok = keys[idx_c] == nb
        idx_new = np.unique(idx_c[ok])
        idx_new = idx_new[~seen[idx_new]]
        seen[idx_new] = True
        frontier = keys[idx_new]
    return bool(seen.all())


def torus_wrap(pts, N: int) -> np.ndarray:
    """Fold sites of Z^d into the discrete torus of side N."""
    if N <= 0:
        raise ValueError("torus side must be positive")
    return np.mod(as_points(pts), N)


def torus_distance(x, y, N: int):
    """Graph distance on the torus: per-axis wrapped differences, summed."""
    xa = as_points(x)
    ya = as_points(y)
    delta = np.abs(np.mod(xa - ya, N))
    return np.minimum(delta, N - delta).sum(axis=1)
