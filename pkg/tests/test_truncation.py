import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtem.errors import CoincidentInputsError, NonFiniteStateError
from mtem.experiments import example_family
from mtem.truncation import (TruncatedCoefficients, dissipativity_witness, lipschitz_witness,
                             power_policy, truncated_diffusion, truncated_drift, truncation_factor,
                             validate_policy)

FAM = example_family()
COEF = FAM.coefficients()
floats = st.floats(-50, 50, allow_nan=False)


def tc(level):
    return TruncatedCoefficients(COEF, level)


def test_factor_inside_ball():
    a, sx, sy = truncation_factor(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 2.0)
    assert a == 1.0
    np.testing.assert_array_equal(sx, [1.0, 0.0])
    np.testing.assert_array_equal(sy, [0.0, 1.0])


def test_factor_scalar_outside():
    a, sx, sy = truncation_factor(3.0, 0.0, 2.0)
    assert a == pytest.approx(2 / 3)
    assert sx == pytest.approx(2.0) and sy == 0.0


def test_factor_delayed_argument_dominates():
    a, sx, sy = truncation_factor(0.0, -4.0, 2.0)
    assert a == 0.5 and sy == -2.0


def test_boundary_takes_identity_branch():
    a, sx, _ = truncation_factor(2.0, 1.0, 2.0)
    assert a == 1.0 and sx == 2.0


def test_nonfinite_state_rejected():
    with pytest.raises(NonFiniteStateError):
        truncation_factor(np.nan, 0.0, 1.0)


def test_truncated_drift_example_value():
    # f(2,0,0) = -4 - 8 = -12, scaled back by 3/2
    assert truncated_drift(tc(2.0), 3.0, 0.0, 0.0)[0] == pytest.approx(-18.0, rel=1e-15)


def test_truncated_diffusion_example_value():
    # g(2,0,0) = sqrt(2 * 2**4) = sqrt(32)
    assert truncated_diffusion(tc(2.0), 3.0, 0.0, 0.0)[0, 0] == pytest.approx(1.5 * math.sqrt(32))


def test_zero_preserved():
    for t in (0.0, 1.0, 100.0):
        assert truncated_drift(tc(1.3), 0.0, 0.0, t)[0] == 0.0
        assert truncated_diffusion(tc(1.3), 0.0, 0.0, t)[0, 0] == 0.0


@given(floats, floats, st.floats(0, 100), st.floats(0.1, 20))
def test_identity_on_ball(x, y, t, level):
    if max(abs(x), abs(y)) > level:
        return
    xv, yv = np.array([x]), np.array([y])
    assert np.array_equal(truncated_drift(tc(level), xv, yv, t), COEF.drift(xv, yv, t))
    assert np.array_equal(truncated_diffusion(tc(level), xv, yv, t), COEF.diffusion(xv, yv, t))


@given(st.lists(floats, min_size=3, max_size=3), st.lists(floats, min_size=3, max_size=3),
       st.floats(0.1, 20))
def test_radial_bound(x, y, level):
    x, y = np.array(x), np.array(y)
    r = max(np.linalg.norm(x), np.linalg.norm(y))
    a, sx, sy = truncation_factor(x, y, level)
    if r > level:
        assert max(np.linalg.norm(sx), np.linalg.norm(sy)) == pytest.approx(level, rel=1e-12)
    else:
        assert a == 1.0


def test_lipschitz_inside_ball_at_most_one():
    rng = np.random.default_rng(1)
    level = 2.0
    x, y, xb, yb = (rng.uniform(-1.4, 1.4, (2000, 1)) for _ in range(4))
    assert np.max(lipschitz_witness(tc(level), x, y, xb, yb, 0.0)) <= 1.0


def test_lipschitz_straddling_boundary():
    rng = np.random.default_rng(2)
    level = 2.0
    x, y = rng.uniform(-level, level, (10_000, 1)), rng.uniform(-level, level, (10_000, 1))
    xb, yb = rng.uniform(-4 * level, 4 * level, (10_000, 1)), rng.uniform(-4 * level, 4 * level, (10_000, 1))
    assert np.max(lipschitz_witness(tc(level), x, y, xb, yb, 1.0)) <= 5.0 + 1e-9


def test_lipschitz_same_x_both_outside():
    rng = np.random.default_rng(3)
    level = 2.0
    x = rng.uniform(2.5, 8.0, (5000, 1)) * rng.choice([-1, 1], (5000, 1))
    y, yb = rng.uniform(-8, 8, (5000, 1)), rng.uniform(-8, 8, (5000, 1))
    ratios = lipschitz_witness(tc(level), x, y, x, yb, 0.0)
    assert np.max(ratios) <= 5.0 + 1e-9
    assert np.max(lipschitz_witness(tc(level), x, y, x, yb, 0.0, coefficient="diffusion")) <= 5.0 + 1e-9


def test_lipschitz_coincident():
    with pytest.raises(CoincidentInputsError):
        lipschitz_witness(tc(2.0), 1.0, 1.0, 1.0, 1.0, 0.0)


def test_dissipativity_inside_reduces_to_khasminskii():
    # K = 0 so the truncation adjustment vanishes
    assert dissipativity_witness(tc(2.0), 1.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_dissipativity_outside_grid():
    vals = np.concatenate([np.linspace(-10, -2.01, 40), np.linspace(2.01, 10, 40)])
    x, y = np.meshgrid(vals, np.linspace(-10, 10, 81))
    for t in (0.0, 1.0, 50.0):
        res = dissipativity_witness(tc(2.0), x.reshape(-1, 1), y.reshape(-1, 1), t)
        assert np.max(res) <= 1e-9


def test_dissipativity_origin_with_K():
    res = dissipativity_witness(tc(2.0), 0.0, 0.0, 3.0, K=2.0, lambda0=1.0)
    assert res == pytest.approx(-2.0 * 4.0 ** -1.0 / 4.0)


def test_power_policy_invariants():
    pol = power_policy(1 / 9)
    assert all(f.passed for f in validate_policy(pol))
    assert pol.level(0.1) == pytest.approx(0.1 ** (-1 / 9))
    assert pol.h_inverse(10.0) == pytest.approx(1e-9)
    with pytest.raises(ValueError):
        pol.level(1.5)


def test_level_must_be_positive():
    with pytest.raises(ValueError):
        TruncatedCoefficients(COEF, 0.0)
