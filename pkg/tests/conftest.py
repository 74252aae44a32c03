import pytest

from walklab import groups, measures
from walklab.potential import GreenCalculator


@pytest.fixture(scope="session")
def free2():
    return groups.FreeGroup(2)


@pytest.fixture(scope="session")
def free2_srw(free2):
    return measures.srw(free2)


@pytest.fixture(scope="session")
def free2_calc(free2, free2_srw):
    # shared heavy table: radius 12 keeps a margin of >= 3 around every
    # query the tests make (targets up to W_4, scans up to W_9)
    return GreenCalculator(free2, free2_srw, trunc=200, support_radius=12)


@pytest.fixture(scope="session")
def z3():
    return groups.FreeAbelianGroup(3)


@pytest.fixture(scope="session")
def z3_srw(z3):
    return measures.srw(z3)


@pytest.fixture(scope="session")
def z3_calc(z3, z3_srw):
    return GreenCalculator(z3, z3_srw, trunc=400, support_radius=64)
