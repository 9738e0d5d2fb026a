import random

import pytest

from ultrastab.ultranorm_linalg import UMatrix


def random_gl(ring, n, rng):
    while True:
        m = UMatrix.random(ring, n, rng)
        if m.is_gl():
            return m


def shifted_random(ring, n, rng, k):
    """A random matrix with every entry of valuation >= k."""
    base = UMatrix.random(ring, n, rng)
    return UMatrix(ring, n, tuple(tuple(ring.shift_up(x, k) for x in row)
                                  for row in base.rows))


@pytest.fixture
def rng():
    return random.Random(20260809)
