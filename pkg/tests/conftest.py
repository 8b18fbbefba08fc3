import pytest

from ksatlas.bridge import chsh_example, n_cycle, pearle_hexagon, pm_square


@pytest.fixture(scope="session")
def hexagon():
    return n_cycle(6)


@pytest.fixture(scope="session")
def pearle():
    return pearle_hexagon()


@pytest.fixture(scope="session")
def chsh():
    return chsh_example()


@pytest.fixture(scope="session")
def pm():
    return pm_square()
