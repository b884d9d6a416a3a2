import numpy as np
import pytest

from interlace.equilibrium import (
    capacity_mc,
    capacity_of,
    equilibrium,
    equilibrium_slice_mass,
)
from interlace.errors import EmptySetError, OutOfRangeError
from interlace.lattice import box_domain, segment

G3_ORIGIN = 1.516386059151978
G3_E1 = 0.5163860591530992


def test_point_capacity_closed_form(table3):
    # one site: the defining identity collapses to g(0,0) e = 1
    sol = equilibrium([(0, 0, 0)], table=table3)
    assert sol.capacity == pytest.approx(1.0 / G3_ORIGIN, abs=1e-9)
    assert len(sol.sites) == 1
    assert sol.weight_of((0, 0, 0)) == pytest.approx(sol.capacity)
    assert sol.weight_of((5, 5, 5)) == 0.0


def test_pair_capacity_closed_form(table3):
    # two sites by symmetry share one weight w with (g00 + g01) w = 1
    sol = equilibrium([(0, 0, 0), (1, 0, 0)], table=table3)
    want = 2.0 / (G3_ORIGIN + G3_E1)
    assert sol.capacity == pytest.approx(want, abs=1e-9)
    assert sol.weights[0] == pytest.approx(sol.weights[1], abs=1e-12)
    assert sol.orbit_count == 1


def test_ball_support_and_orbits(table3):
    sol = equilibrium(box_domain(0, 2, 3), table=table3)
    # support is the internal boundary shell of B(2)
    assert len(sol.sites) == 98
    assert sol.orbit_count == 6
    assert sol.capacity == pytest.approx(5.849583061445997, abs=1e-8)
    assert sol.residual <= 1e-6
    # symmetry: the corner orbit carries one weight
    w_corner = sol.weight_of((2, 2, 2))
    assert w_corner == pytest.approx(sol.weight_of((-2, 2, -2)), abs=1e-12)
    # corners escape more easily than face centers
    assert w_corner > sol.weight_of((2, 0, 0))


def test_symmetry_off_matches_symmetry_on(table3):
    dom = box_domain(0, 1, 3)
    a = equilibrium(dom, table=table3, use_symmetry=True)
    b = equilibrium(dom, table=table3, use_symmetry=False)
    assert a.capacity == pytest.approx(b.capacity, abs=1e-9)
    assert b.orbit_count == len(b.sites)
    assert np.allclose(a.weights, b.weights, atol=1e-9)


def test_asymmetric_set(table3):
    # an L-shape has no sign symmetry on axis 0 yet still solves cleanly
    pts = [(0, 0, 0), (1, 0, 0), (2, 0, 0), (2, 1, 0)]
    sol = equilibrium(pts, table=table3)
    assert sol.capacity > 1.0 / G3_ORIGIN
    assert (sol.weights >= 0).all()


def test_monotonicity_and_subadditivity(table3):
    # capacity grows with the set and is subadditive over a disjoint union
    c1 = capacity_of([(0, 0, 0)], table=table3)
    c2 = capacity_of([(0, 0, 0), (1, 0, 0)], table=table3)
    assert c1 < c2 < 2 * c1
    far = capacity_of([(0, 0, 0), (40, 0, 0)], table=table3)
    assert c1 < far < 2 * c1
    # far-separated pair approaches additivity
    assert far > 2 * c1 - 0.02


def test_segment_capacity_growth(table3):
    # capacity of a k-segment in d=3 grows, sublinearly (log correction)
    caps = [capacity_of(segment(k, 3), table=table3) for k in (4, 8, 16)]
    assert caps[0] < caps[1] < caps[2]
    assert caps[2] < 2.2 * caps[1]


def test_empty_and_budget_errors(table3):
    with pytest.raises(EmptySetError):
        equilibrium(np.zeros((0, 3), np.int64), table=table3)
    with pytest.raises(OutOfRangeError):
        equilibrium(box_domain(0, 40, 3), table=table3, budget=100)


def test_slice_mass_cover(table3):
    # slice windows overlap at their rims, so the masses cover the full
    # capacity at least once and at most three deep
    n, a = 16, 0.25
    masses = []
    _, count = equilibrium_slice_mass(n, a, 3, 0, table=table3)
    for k in range(count):
        m, _ = equilibrium_slice_mass(n, a, 3, k, table=table3)
        assert m > 0
        masses.append(m)
    from interlace.lattice import sausage

    total = capacity_of(sausage(n, a, 3), table=table3)
    assert total * (1 - 1e-9) <= sum(masses) <= 3 * total
    assert max(masses) <= total
    with pytest.raises(OutOfRangeError):
        equilibrium_slice_mass(n, a, 3, count, table=table3)


def test_capacity_mc_brackets_solver(table3):
    sol = equilibrium([(0, 0, 0)], table=table3)
    est = capacity_mc([(0, 0, 0)], replicas=800, kill_radius=24, seed=3, table=table3)
    tol = 3 * est.stderr + est.bias_bound
    assert est.value == pytest.approx(sol.capacity, abs=tol)
    assert est.bias_bound < 0.05
    assert est.replicas == 800


def test_capacity_mc_determinism(table3):
    a = capacity_mc([(0, 0, 0)], replicas=50, kill_radius=16, seed=7, table=table3)
    b = capacity_mc([(0, 0, 0)], replicas=50, kill_radius=16, seed=7, table=table3)
    assert a.value == b.value
    with pytest.raises(OutOfRangeError):
        capacity_mc([(0, 0, 0)], replicas=10, kill_radius=1, seed=0, table=table3)
