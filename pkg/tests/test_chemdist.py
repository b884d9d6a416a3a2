import numpy as np
import pytest

from interlace.chemdist import (
    SiteSet,
    _graph_edges_hashed,
    _graph_edges_sorted,
    ball,
    bfs_distance,
    graph_diameter,
    ray_scan,
    stage_exponent_closed,
    stage_exponents,
    switch_distance,
    switch_stage_count,
    trajectory_graph,
)
from interlace.errors import (
    EmptySetError,
    NotConnectedError,
    NotInSetError,
    OutOfRangeError,
    RayEmptyError,
)
from interlace.lattice import box_domain
from interlace.walk import StoppedPath, sample_range_paths


def test_site_set_membership_round_trip():
    pts = box_domain(0, 2, 3).sites()
    ss = SiteSet(pts)
    assert len(ss) == 125
    assert ss.occupied([(0, 0, 0), (2, 2, 2), (3, 0, 0)]).tolist() == [True, True, False]
    back = ss.sites()
    assert len(np.unique(ss.packing.pack(back))) == 125
    with pytest.raises(EmptySetError):
        SiteSet(np.zeros((0, 3), np.int64))


def test_bfs_matches_l1_on_convex_box():
    # inside a full box the chemical distance is exactly the l1 distance
    dom = box_domain(0, 4, 3)
    dm = bfs_distance(dom.sites(), (0, 0, 0))
    sites = dm.site_set.sites()
    want = np.abs(sites).sum(axis=1)
    idx = dm.site_set.index_of_keys(dm.site_set.packing.pack(sites))
    assert (dm.dist[idx] == want).all()
    assert dm.reached() == 9**3
    assert dm.dist_of((4, -4, 4)) == 12


def test_bfs_detour_around_gap():
    # U-shaped corridor: crossing the open end costs the full detour
    pts = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2)]
    dm = bfs_distance(pts, (0, 0))
    assert dm.dist_of((0, 2)) == 6


def test_bfs_cutoff_and_ball():
    dom = box_domain(0, 3, 3)
    got = ball(dom.sites(), (0, 0, 0), 2)
    want = (np.abs(box_domain(0, 3, 3).sites()).sum(axis=1) <= 2).sum()
    assert len(got) == want
    assert (np.abs(got).sum(axis=1) <= 2).all()
    with pytest.raises(ValueError):
        ball(dom.sites(), (0, 0, 0), -1)


def test_bfs_within_mask():
    dom = box_domain(0, 3, 3)
    half = box_domain((2, 0, 0), 2, 3)
    dm = bfs_distance(dom.sites(), (2, 0, 0), within=half)
    # only sites of the mask are reachable
    reach = dm.site_set.sites()[dm.dist >= 0]
    assert half.contains(reach).all()
    with pytest.raises(NotInSetError):
        bfs_distance(dom.sites(), (-3, 0, 0), within=half)


def test_bfs_truncation_flag():
    pts = box_domain(0, 2, 2).sites()
    ss_all = SiteSet(pts)
    edge = ss_all.packing.pack(np.array([[2, 0]], np.int64))
    ss = SiteSet(pts, edge_keys=edge)
    assert bfs_distance(ss, (0, 0)).truncated
    assert not bfs_distance(ss, (0, 0), cutoff=1).truncated


def test_bfs_source_errors():
    pts = [(0, 0, 0), (1, 0, 0)]
    with pytest.raises(NotInSetError):
        bfs_distance(pts, (5, 5, 5))
    dm = bfs_distance(pts, (0, 0, 0))
    with pytest.raises(NotInSetError):
        dm.dist_of((9, 9, 9))


def test_ray_scan_backward_then_forward():
    pts = [(0, 0, 0), (2, 0, 0), (5, 0, 0), (-3, 0, 0)]
    dom = box_domain(0, 8, 3)
    hits = ray_scan(pts, (1, 0, 0), (1, 0, 0), count=2, scan_domain=dom)
    assert hits.offsets == [-1, 1, 4]  # 0, 2, 5 relative to base 1
    assert (hits.sites()[:, 0] == [0, 2, 5]).all()
    # base itself occupied: backward scan stops at zero
    hits0 = ray_scan(pts, (2, 0, 0), (1, 0, 0), count=1, scan_domain=dom)
    assert hits0.offsets[0] == 0
    with pytest.raises(RayEmptyError):
        ray_scan(pts, (0, 7, 0), (1, 0, 0), scan_domain=dom)
    with pytest.raises(ValueError):
        ray_scan(pts, (0, 0, 0), (0, 0, 0), scan_domain=dom)


def _toy_paths():
    # three short walks: 0 and 1 share site (1,0,0); 2 stays far away
    p0 = StoppedPath((0, 0, 0), np.array([0], np.uint8), "capped", 3)
    p1 = StoppedPath((2, 0, 0), np.array([1], np.uint8), "capped", 3)
    p2 = StoppedPath((9, 9, 9), np.array([0], np.uint8), "capped", 3)
    return [p0, p1, p2]


def test_trajectory_graph_hand_case():
    g = trajectory_graph(_toy_paths(), horizon=1)
    assert g.n == 3
    assert g.edges.tolist() == [[0, 1]]
    assert not g.conservative
    assert list(g.neighbors(0)) == [1]
    assert list(g.neighbors(2)) == []
    assert switch_distance(g, 0, 1) == 1
    with pytest.raises(NotConnectedError):
        switch_distance(g, 0, 2)
    with pytest.raises(OutOfRangeError):
        switch_distance(g, 0, 5)


def test_trajectory_graph_level_filter():
    g = trajectory_graph(_toy_paths(), horizon=1, labels=[0.5, 2.0, 1.0])
    assert list(g.nodes_at_level(1.0)) == [0, 2]
    with pytest.raises(NotInSetError):
        switch_distance(g, 1, 0, level=1.0)
    ok, diam = graph_diameter(g, level=0.6)
    assert ok and diam == 0
    ok2, diam2 = graph_diameter(g, level=np.inf)
    assert not ok2 and diam2 == -1
    with pytest.raises(EmptySetError):
        graph_diameter(g, level=0.1)


def test_trajectory_graph_horizon_guard():
    with pytest.raises(OutOfRangeError):
        trajectory_graph(_toy_paths(), horizon=5)


def test_trajectory_graph_empty():
    g = trajectory_graph([], horizon=0)
    assert g.n == 0 and len(g.edges) == 0


def test_graph_builders_agree():
    # the hashed single-pass builder and the sort-based reference must
    # return identical edge sets and conservative flags
    for seed, n, steps in ((3, 24, 120), (4, 40, 60)):
        paths = sample_range_paths(n, steps, 3, seed=seed)
        for cap in (2, 15):
            fast = _graph_edges_hashed(paths, n, steps, 3, cap)
            slow = _graph_edges_sorted(paths, n, steps, cap)
            assert fast is not None
            assert fast[0].tolist() == slow[0].tolist()
            assert fast[1] == slow[1]


def test_graph_builder_overflow_falls_back():
    # a start beyond the packable coordinate range forces the sort route
    far = 1 << 40
    p0 = StoppedPath((far - 10, 0, 0), np.array([0], np.uint8), "capped", 3)
    p1 = StoppedPath((far - 8, 0, 0), np.array([1], np.uint8), "capped", 3)
    assert _graph_edges_hashed([p0, p1], 2, 1, 3, 15) is None
    g = trajectory_graph([p0, p1], horizon=1)
    assert g.edges.tolist() == [[0, 1]]


def test_graph_conservative_cap():
    # five walks pinned at one site: cap 3 keeps only the first clique
    paths = [StoppedPath((0, 0, 0), np.array([0, 1], np.uint8), "capped", 3) for _ in range(5)]
    g = trajectory_graph(paths, horizon=2, per_site_cap=3)
    assert g.conservative
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    g_full = trajectory_graph(paths, horizon=2, per_site_cap=15)
    assert not g_full.conservative
    assert len(g_full.edges) == 10


def test_graph_diameter_path_graph():
    # chain of overlapping walks: diameter is the chain length
    paths = [
        StoppedPath((2 * i, 0, 0), np.array([0, 0], np.uint8), "capped", 3) for i in range(5)
    ]
    g = trajectory_graph(paths, horizon=2)
    ok, diam = graph_diameter(g)
    assert ok and diam == 4
    assert switch_distance(g, 0, 4) == 4


def test_stage_count_small_dimensions():
    assert [switch_stage_count(d, 0.0) for d in (3, 4, 5, 6, 7)] == [1, 2, 3, 4, 6]


def test_stage_count_guards():
    with pytest.raises(OutOfRangeError):
        switch_stage_count(2, 0.0)
    with pytest.raises(OutOfRangeError):
        switch_stage_count(4, 0.5)  # d h / 2 = 1
    with pytest.raises(OutOfRangeError):
        switch_stage_count(3, 1.0)


def test_stage_recursion_matches_closed_form():
    for d in range(3, 11):
        for h in (0.0, 0.1):
            seq = stage_exponents(d, h, 50)
            want = [stage_exponent_closed(d, h, k) for k in range(1, 51)]
            assert np.max(np.abs(seq - want)) <= 1e-12


def test_stage_count_consistent_with_exponents():
    # the stage count is the first index whose exponent clears d - 2 - 1
    for d in (4, 5, 6, 7):
        k = switch_stage_count(d, 0.0)
        seq = stage_exponents(d, 0.0, k + 1)
        assert seq[k - 1] > d - 3.0
        if k > 1:
            assert seq[k - 2] <= d - 3.0
