import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nilfpp.groups import parse_group


@pytest.fixture(scope="session")
def z2():
    return parse_group("zd:2")


@pytest.fixture(scope="session")
def z3():
    return parse_group("zd:3")


@pytest.fixture(scope="session")
def heis_xy():
    return parse_group("heisenberg:XY")


@pytest.fixture(scope="session")
def heis_xyz():
    return parse_group("heisenberg:XYZ")


@pytest.fixture(scope="session")
def sdzi():
    return parse_group("semidirect-zi")


@pytest.fixture(scope="session")
def oddline():
    from oddline import OddLineModel

    return OddLineModel()


def model_zoo():
    """All models exercised by the generic law tests, including the
    out-of-tree odd/even line extension used to catch quotient-order
    assumptions baked into the core."""
    from oddline import OddLineModel

    return [
        parse_group("zd:1"),
        parse_group("zd:2"),
        parse_group("zd:3"),
        parse_group("heisenberg:XY"),
        parse_group("heisenberg:XYZ"),
        parse_group("semidirect-zi"),
        OddLineModel(),
    ]
