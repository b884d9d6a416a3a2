import numpy as np
import pytest

from interlace.errors import DpBudgetError, OutOfRangeError
from interlace.green import (
    GreenTable,
    canonical_displacement,
    green_extrapolated,
    green_inf,
    green_stopped,
    green_stopped_seq,
    sphere_green_max,
)

# reference values frozen from two independent routes (quadrature and
# the exact stopped-walk extrapolation) agreeing to 1e-9 or better
G3_ORIGIN = 1.516386059151978
G3_E1 = 0.5163860591530992


def test_dimension_guard():
    with pytest.raises(OutOfRangeError):
        green_inf((0, 0), d=2)


def test_origin_value_d3():
    assert green_inf((0, 0, 0)) == pytest.approx(G3_ORIGIN, abs=1e-9)


def test_neighbor_identity_d3():
    # g(0,0) - g(0,e1) = 1: one unit of expected local time is spent at
    # the origin before the first step lands the walk at a neighbor
    assert green_inf((1, 0, 0)) == pytest.approx(G3_E1, abs=1e-9)
    assert green_inf((0, 0, 0)) - green_inf((1, 0, 0)) == pytest.approx(1.0, abs=1e-9)


def test_harmonic_away_from_origin():
    # g(0, .) is discrete harmonic off the origin
    d = 3
    x = np.array([2, 1, 0])
    nb = []
    for ax in range(d):
        for sg in (1, -1):
            y = x.copy()
            y[ax] += sg
            nb.append(green_inf(y))
    assert np.mean(nb) == pytest.approx(green_inf(x), abs=1e-8)


def test_harmonic_at_origin_with_source():
    # at the origin the mean over neighbors drops by exactly 1
    vals = [green_inf(np.roll((sg, 0, 0), ax)) for ax in range(3) for sg in (1, -1)]
    assert np.mean(vals) == pytest.approx(green_inf((0, 0, 0)) - 1.0, abs=1e-8)


def test_symmetry_under_translation_and_sign():
    assert green_inf((3, -2, 1)) == pytest.approx(green_inf((1, 2, 3)), abs=1e-12)
    assert green_inf((5, 5, 5), (6, 5, 5)) == pytest.approx(green_inf((1, 0, 0)), abs=1e-12)


def test_canonical_displacement():
    assert canonical_displacement((-2, 3, 0)) == (3, 2, 0)


def test_stopped_seq_small_horizons_exact():
    # by hand: g(0,0;0) = 1, g(0,0;2) = 1 + P[return at 2] = 1 + 1/(2d)
    seq = green_stopped_seq((0, 0, 0), 2)
    assert seq[0] == pytest.approx(1.0, abs=1e-15)
    assert seq[1] == pytest.approx(1.0, abs=1e-15)
    assert seq[2] == pytest.approx(1.0 + 1.0 / 6.0, abs=1e-14)
    # neighbor: first visit possible at time 1 with probability 1/(2d)
    seqn = green_stopped_seq((1, 0, 0), 1)
    assert seqn[0] == 0.0
    assert seqn[1] == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_stopped_seq_frozen_value():
    # frozen from the coordinate-allocation DP, cross-checked against a
    # direct 3^100-free transition-matrix evaluation at build time
    seq = green_stopped_seq((1, 0, 0), 100)
    assert seq[100] == pytest.approx(0.4508917928885441, abs=1e-12)


def test_stopped_monotone_to_limit():
    seq = green_stopped_seq((0, 0, 0), 400)
    assert (np.diff(seq) >= -1e-15).all()
    assert seq[-1] < G3_ORIGIN
    assert green_stopped((0, 0, 0), (0, 0, 0), 400) == pytest.approx(seq[-1])


def test_stopped_budget():
    with pytest.raises(DpBudgetError):
        green_stopped_seq((0, 0, 0), 5000)
    with pytest.raises(ValueError):
        green_stopped_seq((0, 0, 0), -1)


def test_extrapolated_matches_quadrature():
    val, spread = green_extrapolated((0, 0, 0), n=3000)
    assert spread < 1e-8
    assert val == pytest.approx(G3_ORIGIN, abs=1e-8)
    val4, _ = green_extrapolated((1, 1, 0, 0), n=2000)
    assert val4 == pytest.approx(green_inf((1, 1, 0, 0)), abs=1e-7)


def test_table_matches_scalar_route(table3):
    pts = np.array([(0, 0, 0), (1, 0, 0), (2, 1, 0), (3, 3, 3)], np.int64)
    got = table3.values(pts)
    want = [green_inf(p) for p in pts]
    assert np.max(np.abs(got - want)) < 1e-9


def test_table_pairwise(table3):
    rows = np.array([(0, 0, 0), (1, 0, 0)], np.int64)
    cols = np.array([(0, 0, 0), (0, 1, 0), (1, 1, 1)], np.int64)
    M = table3.pairwise(rows, cols)
    assert M.shape == (2, 3)
    assert M[0, 0] == pytest.approx(G3_ORIGIN, abs=1e-9)
    assert M[1, 1] == pytest.approx(green_inf((1, -1, 0)), abs=1e-9)


def test_table_memory_only_mode():
    t = GreenTable(3, cache=False)
    assert t.value((0, 0, 0)) == pytest.approx(G3_ORIGIN, abs=1e-8)


def test_sphere_green_max_dominates_shell():
    m = sphere_green_max(3, 3)
    shell = [(3, 0, 0), (3, 2, 0), (3, 3, 3), (3, 1, 1)]
    for x in shell:
        assert green_inf(x) <= m + 1e-12
    assert m == pytest.approx(green_inf((3, 0, 0)), abs=1e-12)
