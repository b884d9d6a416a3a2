import numpy as np
import pytest

from interlace.rng import spawn_key, stream


def test_same_address_same_bits():
    a = stream(7, 1, 2).integers(0, 1 << 32, size=16)
    b = stream(7, 1, 2).integers(0, 1 << 32, size=16)
    assert (a == b).all()


def test_sibling_streams_differ():
    a = stream(7, 1, 2).integers(0, 1 << 32, size=16)
    b = stream(7, 1, 3).integers(0, 1 << 32, size=16)
    c = stream(8, 1, 2).integers(0, 1 << 32, size=16)
    assert not (a == b).all()
    assert not (a == c).all()


def test_path_order_matters():
    a = stream(7, 1, 2).integers(0, 1 << 32, size=16)
    b = stream(7, 2, 1).integers(0, 1 << 32, size=16)
    assert not (a == b).all()


def test_draw_order_independence():
    # consuming sibling streams in either order yields the same bits each
    first = [stream(3, i).random(4) for i in range(5)]
    second = [stream(3, i).random(4) for i in reversed(range(5))]
    for i in range(5):
        assert (first[i] == second[4 - i]).all()


def test_spawn_key_validation():
    assert spawn_key(0) == (0,)
    assert spawn_key(5, 1, 2) == (5, 1, 2)
    with pytest.raises(ValueError):
        spawn_key(-1)
    with pytest.raises(ValueError):
        spawn_key(1 << 64)
    with pytest.raises(ValueError):
        spawn_key(0, -3)


def test_numpy_int_path_entries_accepted():
    key = spawn_key(1, np.int64(4))
    assert key == (1, 4)
    assert all(isinstance(v, int) for v in key)
