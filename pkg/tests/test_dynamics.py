import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlnav.dynamics import (
    LinearState,
    Trajectory,
    UnicycleInput,
    UnicycleState,
    discretize_double_integrator,
    linear_to_unicycle_input,
    simulate_linear,
    simulate_unicycle,
    unicycle_from_linear,
    unicycle_to_linear_accel,
    wrap_angle,
)
from tlnav.errors import InputError, NearSingular


# ---------------------------------------------------------------- discretization

def test_zoh_entries_at_ts_0_1():
    ad, bd, cd = discretize_double_integrator(0.1)
    assert bd[0, 0] == pytest.approx(0.005) and bd[2, 0] == pytest.approx(0.1)
    assert ad[0, 2] == pytest.approx(0.1)
    assert np.array_equal(cd, np.eye(4))


def test_one_unit_step():
    tr = simulate_linear(LinearState(0, 0, 0, 0), [[2.0, 0.0]], 1.0)
    assert tuple(tr.states[-1]) == (1.0, 0.0, 2.0, 0.0)


@pytest.mark.parametrize("ts", [0.0, -0.1])
def test_nonpositive_period_rejected(ts):
    with pytest.raises(InputError):
        discretize_double_integrator(ts)


def test_constant_input_closed_form():
    ts, n, u = 0.1, 50, np.array([0.7, -0.3])
    tr = simulate_linear(LinearState(0, 0, 0, 0), np.tile(u, (n, 1)), ts)
    t = n * ts
    np.testing.assert_allclose(tr.states[-1, :2], 0.5 * u * t * t, atol=1e-12)
    np.testing.assert_allclose(tr.states[-1, 2:], u * t, atol=1e-12)


def test_zero_control_coasts():
    tr = simulate_linear(LinearState(0, 0, 1.0, 0), np.zeros((5, 2)), 0.1)
    np.testing.assert_allclose(tr.positions[:, 0], 0.1 * np.arange(6), atol=1e-15)


def test_single_step_from_rest():
    tr = simulate_linear(LinearState(0, 0, 0, 0), [[1.0, 0.0]], 0.1)
    assert tr.states[1, 0] == pytest.approx(0.005) and tr.states[1, 2] == pytest.approx(0.1)


def test_arbitrary_sequence_matches_double_sum(rng):
    ts = 0.2
    u = rng.uniform(-3, 3, size=(40, 2))
    x0 = np.array([1.0, -2.0, 0.5, 0.25])
    tr = simulate_linear(LinearState(*x0), u, ts)
    for k in range(len(u) + 1):
        vel = x0[2:] + ts * u[:k].sum(axis=0)
        pos = x0[:2] + k * ts * x0[2:] + ts * ts * sum((k - j - 0.5) * u[j] for j in range(k))
        np.testing.assert_allclose(tr.states[k, :2], pos, atol=1e-12)
        np.testing.assert_allclose(tr.states[k, 2:], vel, atol=1e-12)


def test_non_finite_input_rejected():
    with pytest.raises(InputError):
        simulate_linear(LinearState(0, 0, 0, 0), [[math.nan, 0.0]], 0.1)


# ---------------------------------------------------------------- feedback linearization

def test_conversion_examples():
    assert linear_to_unicycle_input((1, 0), UnicycleState(0, 0, 0, 1)) == (1, 0)
    assert linear_to_unicycle_input((0, 1), UnicycleState(0, 0, 0, 1)) == (0, 1)
    vd, om = linear_to_unicycle_input((1, 1), UnicycleState(0, 0, math.pi / 4, 2))
    assert vd == pytest.approx(math.sqrt(2)) and om == pytest.approx(0, abs=1e-15)


def test_near_singular_speed():
    with pytest.raises(NearSingular):
        linear_to_unicycle_input((1, 0), UnicycleState(0, 0, 0, 1e-7))


@settings(max_examples=300, deadline=None)
@given(
    st.floats(-math.pi, math.pi),
    st.floats(0.01, 10) | st.floats(-10, -0.01),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_rotation_consistency(theta, v, u1, u2):
    state = UnicycleState(0.0, 0.0, theta, v)
    inp = linear_to_unicycle_input((u1, u2), state)
    back = unicycle_to_linear_accel(state, inp)
    assert back[0] == pytest.approx(u1, abs=1e-12) and back[1] == pytest.approx(u2, abs=1e-12)


def test_forward_then_inverse():
    state = UnicycleState(0, 0, 0.3, 1.7)
    u = unicycle_to_linear_accel(state, UnicycleInput(0.4, -0.9))
    inp = linear_to_unicycle_input(u, state)
    assert inp.v_dot == pytest.approx(0.4) and inp.omega == pytest.approx(-0.9)


# ---------------------------------------------------------------- unicycle simulation

def test_straight_line_with_zero_controls():
    tr = simulate_unicycle(UnicycleState(0, 0, 0, 1.0), np.zeros((10, 2)), 0.1)
    np.testing.assert_allclose(tr.positions[:, 0], 0.1 * np.arange(11), atol=1e-12)
    np.testing.assert_allclose(tr.positions[:, 1], 0.0, atol=1e-12)


def test_zero_controls_conserve_speed_in_both_models():
    uni = simulate_unicycle(UnicycleState(0, 0, 0.7, 1.3), np.zeros((25, 2)), 0.1)
    assert np.all(uni.states[:, 3] == 1.3)
    lin = simulate_linear(LinearState(0, 0, 0.6, -0.8), np.zeros((25, 2)), 0.1)
    assert np.all(np.hypot(lin.states[:, 2], lin.states[:, 3]) == 1.0)


def test_lateral_acceleration_follows_circle_of_radius_one_over_c():
    c, ts = 0.5, 1e-4
    n = 500
    tr = simulate_unicycle(UnicycleState(0, 0, 0, 1.0), np.tile([0.0, c], (n, 1)), ts)
    # a fixed world-frame (0, c) bends the path onto the circle of radius 1/c centred on (0, 1/c);
    # over 0.05 s the path and that circle agree to c**3 t**4 / 8, about 1e-7
    r = 1.0 / c
    dist = np.hypot(tr.positions[:, 0], tr.positions[:, 1] - r)
    assert np.max(np.abs(dist - r)) < 1e-6


def test_heading_stays_normalized():
    tr = simulate_unicycle(UnicycleState(0, 0, 3.0, 1.0), np.tile([0.0, 2.0], (100, 1)), 0.05)
    assert np.all(tr.states[:, 2] > -math.pi) and np.all(tr.states[:, 2] <= math.pi)


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_simulate_unicycle_propagates_singularity():
    with pytest.raises(NearSingular):
        simulate_unicycle(UnicycleState(0, 0, 0, 0.0), [[1.0, 0.0]], 0.1)


def test_unicycle_from_linear():
    assert unicycle_from_linear(LinearState(1, 2, 0, 0), 0.1, 0.5) == UnicycleState(1, 2, 0.5, 0.1)
    s = unicycle_from_linear(LinearState(1, 2, 0, 3.0))
    assert s.theta == pytest.approx(math.pi / 2) and s.v == 3.0


def test_trajectory_requires_uniform_times():
    with pytest.raises(InputError):
        Trajectory([0.0, 0.1, 0.3], np.zeros((3, 4)))
