import numpy as np
import pytest

from resonare.assembly import assemble
from resonare.case import cavity_case, duct_case, flame_duct_case


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def duct_problem():
    case = duct_case()
    return case, assemble(case)


@pytest.fixture(scope="session")
def cavity_problem():
    case = cavity_case(Z=1j)
    return case, assemble(case)


@pytest.fixture(scope="session")
def small_flame():
    case = flame_duct_case(n_cells=24)
    return case, assemble(case)
