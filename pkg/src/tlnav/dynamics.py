"""Unicycle kinematics, feedback linearization and the discrete double integrator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, NearSingular, NumericalError

SINGULAR_EPS = 1e-6


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if t == -math.pi else t


class UnicycleState(NamedTuple):
    x: float
    y: float
    theta: float
    v: float


class LinearState(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float


class Control(NamedTuple):
    u1: float
    u2: float


class UnicycleInput(NamedTuple):
    v_dot: float
    omega: float


@dataclass
class Trajectory:
    """Uniformly sampled state sequence.

    ``states`` rows are ``(x, y, vx, vy)`` for ``kind="linear"`` and
    ``(x, y, theta, v)`` for ``kind="unicycle"``. ``controls`` has one row
    per transition when present.
    """

    times: np.ndarray
    states: np.ndarray
    kind: str = "linear"
    controls: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if len(self.times) != len(self.states):
            raise InputError("times and states differ in length")
        if len(self.times) > 1:
            d = np.diff(self.times)
            if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(d[0], 1.0):
                raise InputError("trajectory timestamps must be strictly increasing and uniform")
        if self.controls is not None:
            self.controls = np.asarray(self.controls, dtype=float).reshape(-1, 2)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def velocities(self) -> np.ndarray:
        if self.kind == "linear":
            return self.states[:, 2:4]
        th, v = self.states[:, 2], self.states[:, 3]
        return np.column_stack([v * np.cos(th), v * np.sin(th)])

    def __len__(self):
        return len(self.times)


def discretize_double_integrator(ts: float):
    """Exact zero-order-hold discretization of the planar double integrator.

    Returns ``(Ad, Bd, Cd)`` for states ``(x, y, vx, vy)`` and inputs ``(ax, ay)``.
    """
    if not ts > 0:
        raise InputError(f"sampling period must be positive, got {ts}")
    ad = np.array([[1.0, 0.0, ts, 0.0], [0.0, 1.0, 0.0, ts], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    h = 0.5 * ts * ts
    bd = np.array([[h, 0.0], [0.0, h], [ts, 0.0], [0.0, ts]])
    return ad, bd, np.eye(4)


def unicycle_to_linear_accel(state: UnicycleState, inp: UnicycleInput) -> Control:
    """Forward map: position accelerations produced by ``(v_dot, omega)``."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    vw = state.v * inp.omega
    return Control(c * inp.v_dot - s * vw, s * inp.v_dot + c * vw)


def linear_to_unicycle_input(u, state: UnicycleState, eps: float = SINGULAR_EPS) -> UnicycleInput:
    """Invert the feedback linearization at the current heading.

    Raises ``NearSingular`` when ``|v| <= eps`` since ``omega`` is obtained by
    dividing ``v * omega`` by ``v``.
    """
    if abs(state.v) <= eps:
        raise NearSingular(f"speed {state.v:g} too small to recover turn rate")
    c, s = math.cos(state.theta), math.sin(state.theta)
    u1, u2 = u
    return UnicycleInput(c * u1 + s * u2, (-s * u1 + c * u2) / state.v)


def _unicycle_rhs(z, v_dot, omega):
    return np.array([z[3] * math.cos(z[2]), z[3] * math.sin(z[2]), omega, v_dot])


def simulate_unicycle(x0: UnicycleState, controls: Sequence, ts: float) -> Trajectory:
    """Roll out the unicycle under double-integrator accelerations.

    Each control is converted at the start of its step using the simulated
    heading and speed, then held while RK4 integrates one period.
    """
    if not ts > 0:
        raise InputError(f"sampling period must be positive, got {ts}")
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    z = np.array(x0, dtype=float)
    states = [z.copy()]
    for u in controls:
        v_dot, omega = linear_to_unicycle_input(u, UnicycleState(*z))
        k1 = _unicycle_rhs(z, v_dot, omega)
        k2 = _unicycle_rhs(z + 0.5 * ts * k1, v_dot, omega)
        k3 = _unicycle_rhs(z + 0.5 * ts * k2, v_dot, omega)
        k4 = _unicycle_rhs(z + ts * k3, v_dot, omega)
        z = z + (ts / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise NumericalError("non-finite unicycle state")
        z[2] = wrap_angle(z[2])
        states.append(z.copy())
    times = ts * np.arange(len(states))
    return Trajectory(times, np.array(states), kind="unicycle", controls=controls)


def simulate_linear(x0: LinearState, controls: Sequence, ts: float) -> Trajectory:
    ad, bd, _ = discretize_double_integrator(ts)
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(controls)):
        raise InputError("non-finite initial state or control")
    states = [x]
    for u in controls:
        x = ad @ x + bd @ u
        states.append(x)
    times = ts * np.arange(len(states))
    return Trajectory(times, np.array(states), kind="linear", controls=controls)


def unicycle_from_linear(x0: LinearState, min_speed: float = 0.1, heading: float = 0.0) -> UnicycleState:
    """Unicycle state matching a linear state; keeps speed at least ``min_speed``."""
    speed = math.hypot(x0[2], x0[3])
    if speed > SINGULAR_EPS:
        return UnicycleState(x0[0], x0[1], math.atan2(x0[3], x0[2]), max(speed, min_speed))
    return UnicycleState(x0[0], x0[1], wrap_angle(heading), min_speed)
