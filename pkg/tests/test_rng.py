import math

import numpy as np
import pytest

from mtem.rng import BrownianSource


def test_increment_distribution():
    dt = 0.01
    z = BrownianSource(42).increments(0, 100_000, dt)[:, 0]
    sigma = math.sqrt(dt / z.size)
    assert abs(z.mean()) < 4 * sigma
    assert z.var() == pytest.approx(dt, rel=0.05)


def test_multidimensional_independent_components():
    z = BrownianSource(1, dimension=3).increments(0, 50_000, 1.0)
    c = np.corrcoef(z.T)
    assert np.max(np.abs(c - np.eye(3))) < 0.03


def test_deterministic_and_prefix_stable():
    src = BrownianSource(99)
    a = src.increments(4, 100, 0.1)
    assert np.array_equal(a, BrownianSource(99).increments(4, 100, 0.1))
    assert np.array_equal(a[:10], src.increments(4, 10, 0.1))
    assert np.array_equal(src.increment(4, 57, 0.1), a[57])


def test_paths_and_seeds_differ():
    a = BrownianSource(1).increments(0, 10, 1.0)
    assert not np.array_equal(a, BrownianSource(1).increments(1, 10, 1.0))
    assert not np.array_equal(a, BrownianSource(2).increments(0, 10, 1.0))


def test_block_matches_rows():
    src = BrownianSource(5)
    block = src.block([3, 0, 7], 20, 0.5)
    assert np.array_equal(block[2], src.increments(7, 20, 0.5))


def test_seed_range():
    with pytest.raises(ValueError):
        BrownianSource(-1)
    BrownianSource(2 ** 64 - 1).increments(0, 2, 1.0)
