import numpy as np
import pytest

from interlace.green import GreenTable


@pytest.fixture(scope="session")
def table3() -> GreenTable:
    """Shared d=3 Green table; the disk cache makes repeated values cheap."""
    return GreenTable(3)


@pytest.fixture(scope="session")
def table4() -> GreenTable:
    return GreenTable(4)


@pytest.fixture()
def rng0() -> np.random.Generator:
    return np.random.default_rng(0)
