"""Shared arrangement fixtures with closed-form answers."""

import pytest

from critset.arrangement import load_family

# k=1, two points on a line: u = 1/2, Hess = -8, p = (2, -2)
FIX1 = {"k": 1, "n": 2, "B": [[1, 1]], "weights": [1, 1], "x": [0, -1]}

# k=1, three points: u = 1 +- 1/sqrt(3)
FIX2 = {"k": 1, "n": 3, "B": [[1, 1, 1]], "weights": [1, 1, 1], "x": [0, -1, -2]}

# k=2, three lines bounding one triangle: u = (1/3, 1/3), Hess = 243
FIX3 = {
    "k": 2,
    "n": 3,
    "B": [[1, 0, 1], [0, 1, 1]],
    "weights": [1, 1, 1],
    "x": [0, 0, -1],
}


@pytest.fixture
def fix1():
    return load_family(FIX1)


@pytest.fixture
def fix2():
    return load_family(FIX2)


@pytest.fixture
def fix3():
    return load_family(FIX3)


def with_fields(document, **fields):
    """Copy of a fixture document with some fields replaced."""
    copy = dict(document)
    copy.update(fields)
    return copy
