"""Chemical distance machinery on occupied site sets.

Distances are nearest-neighbor graph distances inside the occupied set,
computed by a vectorized level BFS over packed site keys.  Rays, the
trajectory intersection graph, and the stage-count combinatorics used by
the connectivity construction live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    EmptySetError,
    NotConnectedError,
    NotInSetError,
    OutOfRangeError,
    RayEmptyError,
)
from .lattice import Domain, Packing, as_points
from .walk import direction_deltas, path_positions

__all__ = [
    "SiteSet",
    "DistanceMap",
    "bfs_distance",
    "ball",
    "RayHits",
    "ray_scan",
    "TrajectoryGraph",
    "trajectory_graph",
    "switch_distance",
    "graph_diameter",
    "switch_stage_count",
    "stage_exponents",
    "stage_exponent_closed",
]


class SiteSet:
    """Sorted packed keys over a padded bounding box, with membership tests."""

    def __init__(self, pts: np.ndarray, packing: Packing | None = None, edge_keys=None):
        pts = as_points(pts)
        if not len(pts):
            raise EmptySetError("site set is empty")
        if packing is None:
            lo = pts.min(axis=0)
            packing = Packing(lo, pts.max(axis=0) - lo + 1)
        self.packing = packing
        self.d = pts.shape[1]
        self.keys = np.unique(packing.pack(pts))
        self.edge_keys = (
            np.unique(np.asarray(edge_keys, np.int64)) if edge_keys is not None else np.empty(0, np.int64)
        )

    def __len__(self):
        return len(self.keys)

    def index_of_keys(self, keys: np.ndarray) -> np.ndarray:
        """Position of each key in the sorted key table, -1 when absent."""
        idx = np.searchsorted(self.keys, keys)
        idx_c = np.clip(idx, 0, len(self.keys) - 1)
        out = np.where(self.keys[idx_c] == keys, idx_c, -1)
        return out

    def occupied(self, pts) -> np.ndarray:
        pts = as_points(pts)
        out = np.zeros(len(pts), bool)
        lo = self.packing.lo
        hi = self.packing.lo + self.packing.shape - 1
        ok = np.all((pts >= lo) & (pts <= hi), axis=1)
        if ok.any():
            out[ok] = self.index_of_keys(self.packing.pack(pts[ok])) >= 0
        return out

    def sites(self) -> np.ndarray:
        return self.packing.unpack(self.keys)


def _as_site_set(obj) -> SiteSet:
    if isinstance(obj, SiteSet):
        return obj
    view = getattr(obj, "site_set", None)
    if callable(view):
        return view()
    return SiteSet(as_points(obj))


@dataclass
class DistanceMap:
    """BFS output: chemical distances from one source over a site set."""

    site_set: SiteSet
    source: tuple[int, ...]
    dist: np.ndarray  # int32 per key, -1 unreached
    truncated: bool  # search touched the window edge: far values are upper bounds only

    def dist_of(self, x) -> int | None:
        pts = as_points(x)
        if not self.site_set.occupied(pts)[0]:
            raise NotInSetError(f"site {tuple(int(v) for v in pts[0])} not occupied")
        idx = self.site_set.index_of_keys(self.site_set.packing.pack(pts))[0]
        v = int(self.dist[idx])
        return None if v < 0 else v

    def reached(self) -> int:
        return int((self.dist >= 0).sum())


def bfs_distance(obj, source, cutoff: int | None = None, within: Domain | None = None) -> DistanceMap:
    """Chemical distances from source; optionally capped or masked.

    ``within`` restricts the walkable sites to a sub-window, which is how
    window-stability of a distance is probed.  The truncated flag reports
    whether the search reached the declared edge of the set.
    """
    ss = _as_site_set(obj)
    pk = ss.packing
    src = as_points(source)
    if len(src) != 1:
        raise ValueError("one source site expected")
    if not ss.occupied(src)[0]:
        raise NotInSetError("source site not occupied")
    src_key = pk.pack(src)[0]
    src_idx = ss.index_of_keys(np.array([src_key]))[0]

    active = None
    if within is not None:
        active = within.contains(ss.sites())
        if not active[src_idx]:
            raise NotInSetError("source site outside the mask")

    dist = np.full(len(ss.keys), -1, np.int32)
    dist[src_idx] = 0
    offs = pk.neighbor_offsets()
    frontier = np.array([src_key], np.int64)
    level = 0
    while len(frontier):
        if cutoff is not None and level >= cutoff:
            break
        nb = (frontier[:, None] + offs[None, :]).ravel()
        idx = ss.index_of_keys(nb)
        idx = idx[idx >= 0]
        if active is not None:
            idx = idx[active[idx]]
        idx = idx[dist[idx] < 0]
        if not len(idx):
            break
        idx = np.unique(idx)
        level += 1
        dist[idx] = level
        frontier = ss.keys[idx]

    if len(ss.edge_keys):
        eidx = ss.index_of_keys(ss.edge_keys)
        eidx = eidx[eidx >= 0]
        truncated = bool((dist[eidx] >= 0).any()) if len(eidx) else False
    else:
        truncated = False
    return DistanceMap(site_set=ss, source=tuple(int(v) for v in src[0]), dist=dist, truncated=truncated)


def ball(obj, center, radius: int, within: Domain | None = None) -> np.ndarray:
    """Sites at chemical distance <= radius from center."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    dm = bfs_distance(obj, center, cutoff=radius, within=within)
    mask = (dm.dist >= 0) & (dm.dist <= radius)
    return dm.site_set.packing.unpack(dm.site_set.keys[mask])


# ------------------------------------------------------------------- rays


@dataclass
class RayHits:
    """Occupied multiples of a direction through a base site.

    offsets[0] is the largest m <= 0 with base + m*dir occupied; latter
    entries walk forward through the next occupied multiples.
    """

    base: tuple[int, ...]
    direction: tuple[int, ...]
    offsets: list[int]

    def sites(self) -> np.ndarray:
        b = np.asarray(self.base, np.int64)
        x = np.asarray(self.direction, np.int64)
        return b[None, :] + np.asarray(self.offsets, np.int64)[:, None] * x[None, :]


def ray_scan(obj, base, direction, count: int = 1, scan_domain: Domain | None = None) -> RayHits:
    """Backward-then-forward scan of the ray {base + m * direction}.

    The backward scan finds the last occupied multiple at m <= 0; the
    forward scan then collects the next ``count`` occupied multiples.
    Scanning is confined to ``scan_domain`` (or the field's own window);
    an empty backward scan raises RayEmptyError.
    """
    ss = _as_site_set(obj)
    dom = scan_domain if scan_domain is not None else getattr(obj, "scan_window", None)
    b = np.asarray(base, np.int64)
    x = np.asarray(direction, np.int64)
    if not x.any():
        raise ValueError("direction must be nonzero")

    def in_window(m):
        p = (b + m * x)[None, :]
        if dom is not None:
            return bool(dom.contains(p)[0])
        lo = ss.packing.lo
        return bool(np.all((p >= lo) & (p <= lo + ss.packing.shape - 1)))

    m = 0
    back = None
    while in_window(m):
        if ss.occupied((b + m * x)[None, :])[0]:
            back = m
            break
        m -= 1
    if back is None:
        raise RayEmptyError("no occupied multiple at or behind the base within the window")
    offsets = [back]
    m = back + 1
    while len(offsets) < count + 1 and in_window(m):
        if ss.occupied((b + m * x)[None, :])[0]:
            offsets.append(m)
        m += 1
    return RayHits(
        base=tuple(int(v) for v in b), direction=tuple(int(v) for v in x), offsets=offsets
    )


# ------------------------------------------------- trajectory intersection


@dataclass
class TrajectoryGraph:
    """Shared-site graph over trajectory prefixes.

    Node i and j are adjacent when their first ``horizon`` steps share a
    site.  conservative is set when a site met more than per_site_cap
    trajectories and edges may be missing.
    """

    n: int
    horizon: int
    edges: np.ndarray  # (E, 2) sorted pairs
    labels: np.ndarray  # per-node level labels (inf when unknown)
    conservative: bool
    adj: list[np.ndarray] = field(repr=False, default_factory=list)

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj[i]

    def nodes_at_level(self, u: float) -> np.ndarray:
        return np.nonzero(self.labels <= u)[0]


@njit(cache=True)
def _collect_shared(starts, codes, horizon, deltas, bits, tab_key, tab_first, tab_last, tab_hot, hot_key, hot_traj):
    # One pass over every prefix position.  The open-address table dedups
    # (site, trajectory) visits; a site's second distinct trajectory flips it
    # hot and every distinct visitor lands in the hot buffer.  Status 1:
    # coordinate outside the packable range, 2: table past 3/4 load, 3: hot
    # buffer full; caller reacts.
    m, d = starts.shape
    mask = tab_key.shape[0] - 1
    bound = (np.int64(1) << (bits - 1)) - 1
    cap = (tab_key.shape[0] >> 2) * 3
    hot_cap = hot_key.shape[0]
    hn = 0
    inserts = 0
    pos = np.empty(d, np.int64)
    for i in range(m):
        for a in range(d):
            pos[a] = starts[i, a]
        base = i * horizon
        for s in range(horizon + 1):
            if s > 0:
                c = codes[base + s - 1]
                for a in range(d):
                    pos[a] += deltas[c, a]
            key = np.int64(0)
            for a in range(d):
                v = pos[a]
                if v > bound or v < -bound:
                    return 1, hn
                key = (key << bits) | (v + bound)
            h = key * np.int64(-7046029254386353131)
            slot = (h ^ (h >> 29)) & mask
            while True:
                k2 = tab_key[slot]
                if k2 == key:
                    if tab_last[slot] != i:
                        if tab_hot[slot] == 0:
                            if hn >= hot_cap:
                                return 3, hn
                            hot_key[hn] = key
                            hot_traj[hn] = tab_first[slot]
                            hn += 1
                            tab_hot[slot] = 1
                        if hn >= hot_cap:
                            return 3, hn
                        hot_key[hn] = key
                        hot_traj[hn] = i
                        hn += 1
                        tab_last[slot] = i
                    break
                if k2 == -1:
                    if inserts >= cap:
                        return 2, hn
                    tab_key[slot] = key
                    tab_first[slot] = i
                    tab_last[slot] = i
                    inserts += 1
                    break
                slot = (slot + 1) & mask
    return 0, hn


@njit(cache=True)
def _expand_cliques(owners, group_starts, group_counts, cap, n):
    total = 0
    for g in range(group_starts.shape[0]):
        c = group_counts[g]
        if c > cap:
            c = cap
        total += c * (c - 1) // 2
    out = np.empty(total, np.int64)
    w = 0
    for g in range(group_starts.shape[0]):
        s = group_starts[g]
        c = group_counts[g]
        if c > cap:
            c = cap
        for a in range(c):
            ia = np.int64(owners[s + a])
            for b in range(a + 1, c):
                out[w] = ia * n + np.int64(owners[s + b])
                w += 1
    return out


def _graph_edges_hashed(trajs, n, horizon, d, per_site_cap):
    """Edge set via the single-pass kernel; None when coordinates cannot be
    packed into one word (caller then takes the sort route)."""
    bits = 63 // d
    if bits < 2:
        return None
    starts = np.array([t.start for t in trajs], np.int64).reshape(n, d)
    if horizon:
        codes = np.concatenate([np.ascontiguousarray(t.codes[:horizon]) for t in trajs])
    else:
        codes = np.empty(0, np.uint8)
    deltas = direction_deltas(d)
    total = n * (horizon + 1)
    size = 1 << max(10, int(np.ceil(np.log2(total * 0.75 + 64))))
    hot_cap = total // 6 + 4096
    while True:
        tab_key = np.full(size, -1, np.int64)
        tab_first = np.empty(size, np.int32)
        tab_last = np.empty(size, np.int32)
        tab_hot = np.zeros(size, np.uint8)
        hot_key = np.empty(hot_cap, np.int64)
        hot_traj = np.empty(hot_cap, np.int32)
        status, hn = _collect_shared(
            starts, codes, horizon, deltas, bits, tab_key, tab_first, tab_last, tab_hot, hot_key, hot_traj
        )
        if status == 0:
            break
        if status == 1:
            return None
        if status == 2:
            size <<= 1
        else:
            hot_cap *= 2
    hk = hot_key[:hn]
    ht = hot_traj[:hn]
    order = np.lexsort((ht, hk))
    hk = hk[order]
    ht = ht[order]
    # a trajectory returning after another visitor re-enters the buffer
    keep = np.r_[True, (hk[1:] != hk[:-1]) | (ht[1:] != ht[:-1])]
    hk = hk[keep]
    ht = ht[keep]
    group_starts = np.nonzero(np.r_[True, hk[1:] != hk[:-1]])[0]
    group_counts = np.diff(np.r_[group_starts, len(hk)])
    conservative = bool((group_counts > per_site_cap).any())
    packed = _expand_cliques(ht, group_starts, group_counts, per_site_cap, n)
    uniq = np.unique(packed)
    edges = np.stack([uniq // n, uniq % n], axis=1) if len(uniq) else np.empty((0, 2), np.int64)
    return edges, conservative


def _graph_edges_sorted(trajs, n, horizon, per_site_cap):
    """Edge set via per-trajectory dedup and one global sort.  Slower but
    free of coordinate-width limits; also the cross-check reference."""
    all_pts = []
    owner = []
    for i, t in enumerate(trajs):
        pos = path_positions(t.start, t.codes[:horizon], len(t.start))
        upts = np.unique(pos, axis=0)
        all_pts.append(upts)
        owner.append(np.full(len(upts), i, np.int64))
    cat = np.concatenate(all_pts)
    own = np.concatenate(owner)
    lo = cat.min(axis=0)
    pk = Packing(lo, cat.max(axis=0) - lo + 1)
    keys = pk.pack(cat)
    order = np.lexsort((own, keys))
    keys = keys[order]
    own = own[order]
    starts = np.nonzero(np.r_[True, keys[1:] != keys[:-1]])[0]
    counts = np.diff(np.r_[starts, len(keys)])

    conservative = bool((counts > per_site_cap).any())
    edge_set = set()
    for s, c in zip(starts, counts):
        if c < 2:
            continue
        group = own[s : s + min(c, per_site_cap)]
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                i, j = int(group[a]), int(group[b])
                if i != j:
                    edge_set.add((i, j) if i < j else (j, i))
    edges = np.array(sorted(edge_set), np.int64).reshape(-1, 2)
    return edges, conservative


def trajectory_graph(trajectories, horizon: int, per_site_cap: int = 15, labels=None) -> TrajectoryGraph:
    """Build the prefix intersection graph of a trajectory collection.

    Accepts an OccupancyField (its trajectories and labels are used) or a
    list of objects with start/codes attributes.
    """
    trajs = getattr(trajectories, "trajectories", trajectories)
    if labels is None:
        got = getattr(trajectories, "labels", None)
        labels = np.asarray(got, float) if got is not None else np.full(len(trajs), np.inf)
    n = len(trajs)
    if n == 0:
        return TrajectoryGraph(0, horizon, np.empty((0, 2), np.int64), np.empty(0), False, [])
    for i, t in enumerate(trajs):
        if len(t.codes) < horizon:
            raise OutOfRangeError(f"trajectory {i} shorter than graph horizon {horizon}")
    d = len(trajs[0].start)
    built = _graph_edges_hashed(trajs, n, horizon, d, per_site_cap)
    if built is None:
        built = _graph_edges_sorted(trajs, n, horizon, per_site_cap)
    edges, conservative = built
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    adj = [np.array(sorted(a), np.int64) for a in adj]
    return TrajectoryGraph(
        n=n,
        horizon=horizon,
        edges=edges,
        labels=np.asarray(labels, float),
        conservative=conservative,
        adj=adj,
    )


def _bfs_graph(graph: TrajectoryGraph, src: int, allowed: np.ndarray) -> np.ndarray:
    dist = np.full(graph.n, -1, np.int64)
    if not allowed[src]:
        raise NotInSetError("source node not in the level subgraph")
    dist[src] = 0
    frontier = [src]
    while frontier:
        nxt = []
        for i in frontier:
            for j in graph.adj[i]:
                if allowed[j] and dist[j] < 0:
                    dist[j] = dist[i] + 1
                    nxt.append(j)
        frontier = nxt
    return dist


def switch_distance(graph: TrajectoryGraph, i: int, j: int, level: float = np.inf) -> int:
    """Least number of trajectory switches linking node i to node j."""
    if not (0 <= i < graph.n and 0 <= j < graph.n):
        raise OutOfRangeError("node index out of range")
    allowed = graph.labels <= level
    dist = _bfs_graph(graph, i, allowed)
    if dist[j] < 0:
        raise NotConnectedError(f"nodes {i} and {j} not chain-connected at this level")
    return int(dist[j])


@njit(cache=True)
def _ecc_all(indptr, indices, active):
    n = active.shape[0]
    m = 0
    for i in range(n):
        if active[i]:
            m += 1
    dist = np.empty(n, np.int32)
    queue = np.empty(n, np.int32)
    diam = 0
    for s in range(n):
        if not active[s]:
            continue
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        far = 0
        while head < tail:
            i = queue[head]
            head += 1
            di = dist[i]
            if di > far:
                far = di
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if active[j] and dist[j] < 0:
                    dist[j] = di + 1
                    queue[tail] = j
                    tail += 1
        if tail != m:
            return 0, -1
        if far > diam:
            diam = far
    return 1, diam


def _graph_csr(graph: TrajectoryGraph) -> tuple[np.ndarray, np.ndarray]:
    cached = getattr(graph, "_csr", None)
    if cached is None:
        indptr = np.zeros(graph.n + 1, np.int64)
        if graph.adj:
            np.cumsum([len(a) for a in graph.adj], out=indptr[1:])
            indices = (
                np.concatenate(graph.adj).astype(np.int32) if indptr[-1] else np.empty(0, np.int32)
            )
        else:
            indices = np.empty(0, np.int32)
        cached = (indptr, indices)
        graph._csr = cached
    return cached


def graph_diameter(graph: TrajectoryGraph, level: float = np.inf) -> tuple[bool, int]:
    """(connected, max pairwise switch distance) of the level subgraph."""
    allowed = graph.labels <= level
    if not allowed.any():
        raise EmptySetError("no nodes at this level")
    indptr, indices = _graph_csr(graph)
    ok, diam = _ecc_all(indptr, indices, allowed)
    return bool(ok), int(diam)


# ------------------------------------------------------ stage combinatorics


def switch_stage_count(d: int, h: float = 0.0) -> int:
    """Stages of range-doubling needed before two prefixes must intersect.

    Smallest k >= 1 with d h / 2 + (d - 3 + h - d h / 2) (1 - 2/d)^(k-1)
    strictly below 1; diverges (OutOfRange) when even the k -> inf limit
    fails, which happens once d h / 2 >= 1.
    """
    if d < 3:
        raise OutOfRangeError("stage count needs d >= 3")
    if not 0.0 <= h < 1.0:
        raise OutOfRangeError("density exponent h must lie in [0, 1)")
    if d * h / 2.0 >= 1.0:
        raise OutOfRangeError("no finite stage count: d h / 2 >= 1")
    coeff = d - 3.0 + h - d * h / 2.0
    ratio = 1.0 - 2.0 / d
    k = 1
    while d * h / 2.0 + coeff * ratio ** (k - 1) >= 1.0:
        k += 1
        if k > 10_000:
            raise OutOfRangeError("stage count did not converge")
    return k


def stage_exponents(d: int, h: float, count: int) -> np.ndarray:
    """Volume-growth exponents a_1, ..., a_count of the stage recursion:
    a_1 = 1 - h, a_{k+1} = (a_k + 2)(1 - 2/d) - h."""
    if d < 3:
        raise OutOfRangeError("stage exponents need d >= 3")
    if count < 1:
        raise ValueError("need at least one stage")
    out = np.empty(count)
    out[0] = 1.0 - h
    for k in range(1, count):
        out[k] = (out[k - 1] + 2.0) * (1.0 - 2.0 / d) - h
    return out


def stage_exponent_closed(d: int, h: float, k: int) -> float:
    """Closed form of the k-th stage exponent."""
    if k < 1:
        raise ValueError("stage index starts at 1")
    return d - 2.0 - d * h / 2.0 - (d - 3.0 + h - d * h / 2.0) * (1.0 - 2.0 / d) ** (k - 1)
