import numpy as np
import pytest

from interlace.errors import EmptySetError, OutOfRangeError
from interlace.lattice import (
    Box,
    Domain,
    Packing,
    as_points,
    box_domain,
    is_connected_sites,
    max_distance,
    norm,
    sausage,
    segment,
    torus_distance,
    torus_wrap,
)


def test_as_points_promotes_single_site():
    a = as_points((1, 2, 3))
    assert a.shape == (1, 3)
    assert a.dtype == np.int64


def test_as_points_rejects_huge_coordinates():
    with pytest.raises(OutOfRangeError):
        as_points((1 << 41, 0, 0))


def test_norm_kinds():
    x = (3, -4, 0)
    assert norm(x, "l1") == 7
    assert norm(x, "linf") == 4
    assert norm(x, "l2") == pytest.approx(5.0)
    arr = norm([(1, 0, 0), (1, 1, 1)], "l1")
    assert list(arr) == [1, 3]
    with pytest.raises(ValueError):
        norm(x, "l3")


def test_max_distance():
    pts = [(0, 0, 0), (2, 0, 0)]
    assert max_distance((0, 0, 0), pts, "linf") == 2
    assert max_distance((-1, 0, 0), pts, "l1") == 3
    with pytest.raises(EmptySetError):
        max_distance((0, 0, 0), np.zeros((0, 3), np.int64))


def test_box_shape_volume_contains():
    b = Box((-1, -1), (2, 3))
    assert b.dim == 2
    assert b.shape == (4, 5)
    assert b.volume() == 20
    got = b.contains(np.array([[0, 0], [3, 0], [-1, 3]], np.int64))
    assert list(got) == [True, False, True]
    assert len(b.sites()) == 20


def test_box_rejects_inverted_corners():
    with pytest.raises(ValueError):
        Box((0, 0), (-1, 0))


def test_box_domain_ball_volume():
    dom = box_domain(0, 2, 3)
    assert dom.volume() == 125
    assert dom.contains_one((2, 2, 2))
    assert not dom.contains_one((3, 0, 0))


def test_domain_union_dedup():
    dom = Domain([Box((0, 0), (1, 1)), Box((1, 0), (2, 1))])
    assert dom.volume() == 6
    sites = dom.sites()
    keys = Packing.for_box(dom.bounding_box()).pack(sites)
    assert len(np.unique(keys)) == len(sites)


def test_domain_boundary_is_internal():
    dom = box_domain(0, 2, 3)
    bd = dom.boundary()
    # boundary of B(2) is the full shell: 5^3 - 3^3 sites
    assert len(bd) == 98
    assert dom.contains(bd).all()
    assert (norm(bd, "linf") == 2).all()


def test_domain_boundary_of_union_skips_interior_faces():
    # two abutting boxes tile a 6x3 rectangle whose interior is the
    # middle row minus its ends; the shared face must not leak through
    dom = Domain([Box((0, 0), (2, 2)), Box((3, 0), (5, 2))])
    bd = dom.boundary()
    assert dom.volume() == 18
    assert len(bd) == 14
    assert not any((int(x), int(y)) in {(1, 1), (2, 1), (3, 1), (4, 1)} for x, y in bd)


def test_domain_inflate_grows_boxes():
    dom = box_domain(0, 2, 3).inflate(0.5)
    assert dom.contains_one((3, 3, 3))
    with pytest.raises(ValueError):
        box_domain(0, 2, 3).inflate(-0.1)


def test_domain_enumeration_budget():
    dom = box_domain(0, 300, 3)
    with pytest.raises(OutOfRangeError):
        dom.sites(budget=1000)


def test_segment_sites():
    pts = segment(4, 3)
    assert pts.shape == (5, 3)
    assert list(pts[:, 0]) == [0, 1, 2, 3, 4]
    assert not pts[:, 1:].any()


def test_sausage_volume_and_shape():
    dom = sausage(8, 0.25, 3)
    r = int(np.floor(8 ** 0.25))
    assert dom.contains_one((8 + r, r, r))
    assert not dom.contains_one((8 + r + 1, 0, 0))
    assert dom.volume() == (2 * r + 1) ** 2 * (2 * r + 1 + 8)


def test_packing_round_trip():
    pk = Packing((-3, -3, -3), (7, 7, 7))
    pts = box_domain(0, 3, 3).sites()
    keys = pk.pack(pts)
    assert len(np.unique(keys)) == len(pts)
    back = pk.unpack(keys)
    assert (back == pts).all()


def test_packing_pad_keeps_neighbors_valid():
    pk = Packing((0, 0), (2, 2))
    corner = np.array([[0, 0]], np.int64)
    key = pk.pack(corner)[0]
    for off in pk.neighbor_offsets():
        nb = pk.unpack(np.array([key + off]))[0]
        assert np.abs(nb - corner[0]).sum() == 1


def test_packing_rejects_outside_window():
    pk = Packing((0, 0), (2, 2))
    with pytest.raises(OutOfRangeError):
        pk.pack(np.array([[5, 0]], np.int64))


def test_is_connected_sites():
    assert is_connected_sites([(0, 0, 0), (1, 0, 0), (1, 1, 0)])
    assert not is_connected_sites([(0, 0, 0), (2, 0, 0)])
    assert is_connected_sites(box_domain(0, 2, 3).sites())


def test_torus_wrap_and_distance():
    assert list(torus_wrap((-1, 5, 16), 16)[0]) == [15, 5, 0]
    d = torus_distance((0, 0, 0), (15, 8, 1), 16)
    assert d[0] == 1 + 8 + 1
    # wrap-around is never worse than the straight difference
    x = np.array([[3, 3, 3]])
    y = np.array([[14, 0, 3]])
    assert torus_distance(x, y, 16)[0] <= np.abs(x - y).sum()
