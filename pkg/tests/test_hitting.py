import numpy as np
import pytest

from interlace.errors import ChainBudgetError, EmptySetError, NotConnectedError
from interlace.hitting import (
    hit_lower_diam,
    hit_lower_volume,
    hit_prob_chain,
    hit_prob_exact,
    hit_sandwich,
)
from interlace.lattice import box_domain, segment

G3_ORIGIN = 1.516386059151978
G3_E1 = 0.5163860591530992


def test_on_set_is_certain():
    v, err = hit_prob_exact((0, 0, 0), [(0, 0, 0), (1, 0, 0)])
    assert v == 1.0 and err == 0.0


def test_point_target_closed_form(table3):
    # P_x[hit {0}] = g(x,0)/g(0,0)
    v, err = hit_prob_exact((1, 0, 0), [(0, 0, 0)], table=table3)
    assert v == pytest.approx(G3_E1 / G3_ORIGIN, abs=1e-8)
    assert err <= 1e-6


def test_finite_horizon_hand_counts():
    # target e1 from the origin: first entry at time 1 w.p. 1/6; time 2
    # is blocked by parity; exactly-at-3 paths count 9 of 6^3
    A = [(1, 0, 0)]
    assert hit_prob_exact((0, 0, 0), A, n=1)[0] == pytest.approx(1 / 6, abs=1e-15)
    assert hit_prob_exact((0, 0, 0), A, n=2)[0] == pytest.approx(1 / 6, abs=1e-15)
    assert hit_prob_exact((0, 0, 0), A, n=3)[0] == pytest.approx(1 / 6 + 9 / 216, abs=1e-14)


def test_finite_horizon_monotone_to_infinite(table3):
    A = [(2, 0, 0), (2, 1, 0)]
    x = (0, 0, 0)
    vals = [hit_prob_exact(x, A, n=n)[0] for n in (4, 8, 16, 32)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    vinf, err = hit_prob_exact(x, A, table=table3)
    assert vals[-1] <= vinf + err + 1e-12


def test_dp_budget_guard():
    with pytest.raises(ChainBudgetError):
        hit_prob_exact((0, 0, 0), [(1, 0, 0)], n=200)
    with pytest.raises(ValueError):
        hit_prob_exact((0, 0, 0), [(1, 0, 0)], n=-1)
    with pytest.raises(EmptySetError):
        hit_prob_exact((0, 0, 0), np.zeros((0, 3), np.int64))


def test_chain_solve_agrees_with_last_exit(table3):
    A = [(0, 0, 0), (1, 0, 0)]
    for x in ((3, 0, 0), (2, 2, 1), (0, 4, 0)):
        direct, err = hit_prob_exact(x, A, table=table3)
        via_chain = hit_prob_chain(x, A, radius=10, table=table3)
        assert via_chain == pytest.approx(direct, abs=5e-3)
    with pytest.raises(ChainBudgetError):
        hit_prob_chain((30, 0, 0), A, radius=10, table=table3)


def test_sandwich_brackets_exact(table3):
    rng = np.random.default_rng(1)
    for _ in range(10):
        pts = np.unique(rng.integers(-2, 3, size=(5, 3)), axis=0)
        x = tuple(rng.integers(-6, 7, size=3))
        if np.all(pts == np.asarray(x), axis=1).any():
            continue
        b = hit_sandwich(x, pts, n=40, table=table3)
        v, err = hit_prob_exact(x, pts, table=table3)
        assert b.lower <= v + err + 1e-9
        assert v - err - 1e-9 <= b.upper
        assert b.upper <= 1.0


def test_sandwich_infinite_horizon_mode(table3):
    b = hit_sandwich((4, 0, 0), box_domain(0, 1, 3), table=table3)
    assert b.horizon is None
    assert 0 < b.lower <= b.upper <= 1.0


def test_lower_shape_factors():
    seg = segment(8, 3)
    x = (0, 12, 0)
    v = hit_lower_diam(x, seg, n=400)
    assert v == pytest.approx(8 / (12 * np.log(8)))
    w = hit_lower_volume(x, seg, n=400)
    assert w == pytest.approx(9 ** (1 / 3) / 12)
    # closer start point gives a larger factor
    assert hit_lower_diam((0, 9, 0), seg, n=400) > v


def test_lower_shape_factor_guards():
    seg = segment(8, 3)
    with pytest.raises(ValueError):
        hit_lower_diam((0, 12, 0), seg, n=10)
    with pytest.raises(NotConnectedError):
        hit_lower_diam((0, 12, 0), [(0, 0, 0), (5, 0, 0)], n=400)
    with pytest.raises(EmptySetError):
        hit_lower_diam((0, 12, 0), [(0, 0, 0)], n=400)
