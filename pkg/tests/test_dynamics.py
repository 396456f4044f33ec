import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdi_mpc.dynamics import (
    BoxSet,
    CoupledTanks,
    TankParams,
    as_state,
    continuous_rhs,
    jacobians,
    step,
)
from oracles import tank_step

U_STAR = 0.07891403330879258  # (alpha2/alpha1) * sqrt(0.8)

levels = st.floats(0.0, 1.0, allow_nan=False)
inputs = st.floats(0.0, 1.0, allow_nan=False)


def test_zero_is_equilibrium():
    assert np.array_equal(step([0.0, 0.0], [0.0]), [0.0, 0.0])


def test_drain_from_quarter_level():
    np.testing.assert_allclose(step([0.25, 0.25], [0.0]), [0.24228, 0.25], atol=1e-15)


def test_setpoint_is_fixed_point():
    p = TankParams()
    assert p.equilibrium_input(0.8) == pytest.approx(U_STAR, abs=1e-15)
    np.testing.assert_allclose(step([0.8, 0.8], [U_STAR]), [0.8, 0.8], atol=1e-12)


def test_jacobian_hand_values():
    A, B = jacobians([0.25, 0.25], [0.0])
    assert A[0, 0] == pytest.approx(0.98456, abs=1e-14)
    assert B[0, 0] == pytest.approx(0.175, abs=1e-14)
    assert B[1, 0] == 0.0


def test_jacobian_finite_at_empty_tanks():
    A, B = jacobians([0.0, 0.0], [0.0])
    assert np.all(np.isfinite(A)) and np.all(np.isfinite(B))


def test_rhs_hand_value():
    np.testing.assert_allclose(continuous_rhs([0.25, 0.25], [0.0]), [-0.0772, 0.0], atol=1e-15)
    assert np.array_equal(continuous_rhs([0.0, 0.0], [0.0]), [0.0, 0.0])


def test_euler_consistency():
    x, u = np.array([0.5, 0.3]), np.array([0.1])
    np.testing.assert_allclose(step(x, u) - x, 0.1 * continuous_rhs(x, u), rtol=0, atol=1e-16)


def test_jacobians_match_central_differences():
    rng = np.random.default_rng(7)
    p = TankParams()
    for _ in range(100):
        x = rng.uniform(0.05, 0.95, 2)
        u = rng.uniform(0.0, 1.0, 1)
        A, B = jacobians(x, u, p)
        h = 1e-6
        A_fd = np.column_stack([(step(x + h * e, u) - step(x - h * e, u)) / (2 * h) for e in np.eye(2)])
        B_fd = ((step(x, u + h) - step(x, u - h)) / (2 * h)).reshape(2, 1)
        np.testing.assert_allclose(A, A_fd, rtol=1e-5, atol=1e-9)
        np.testing.assert_allclose(B, B_fd, rtol=1e-5, atol=1e-9)


@given(levels, levels, inputs)
def test_step_matches_scalar_oracle(h1, h2, u):
    np.testing.assert_allclose(step([h1, h2], [u]), tank_step(h1, h2, u), rtol=1e-14, atol=1e-16)


@given(levels, levels, inputs)
def test_step_never_negative(h1, h2, u):
    assert np.all(step([h1, h2], [u]) >= 0.0)


@given(st.floats(0.01, 1.0))
def test_equilibrium_family(level):
    model = CoupledTanks()
    x, u = model.equilibrium(level)
    np.testing.assert_allclose(model.step(x, u), [level, level], atol=1e-12)


@given(st.floats(0.01, 0.95), levels, st.floats(0.0, 0.99), st.floats(1e-3, 0.01))
def test_monotone_in_input(h1, h2, u, du):
    assert step([h1, h2], [u + du])[0] > step([h1, h2], [u])[0]


@pytest.mark.parametrize("bad", [[np.nan, 0.0], [0.1]])
def test_rejects_invalid_state(bad):
    with pytest.raises(ValueError):
        step(bad, [0.0])


def test_negative_level_drains_as_empty():
    np.testing.assert_array_equal(step([-0.1, 0.0], [0.0]), [0.0, 0.0])


def test_rejects_nonfinite_input():
    with pytest.raises(ValueError):
        step([0.1, 0.1], [np.inf])


def test_params_validation():
    with pytest.raises(ValueError):
        TankParams(alpha1=0.0)
    with pytest.raises(ValueError):
        TankParams(sample_time=-1.0)


def test_box_set():
    box = BoxSet([0.0, 0.0], [1.0, 1.0])
    assert box.contains([0.5, 1.0])
    assert not box.contains([0.5, 1.1])
    assert box.contains([0.5, 1.0 + 1e-9], tol=1e-8)
    np.testing.assert_array_equal(box.project([-0.2, 1.3]), [0.0, 1.0])
    assert box.violation([1.25, -0.5]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        BoxSet([1.0], [0.0])


def test_as_state_shape():
    assert as_state([0.1, 0.2]).shape == (2,)
    assert math.isclose(as_state((0.3, 0.4))[1], 0.4)
