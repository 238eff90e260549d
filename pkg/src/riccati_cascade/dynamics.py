"""
Ground-truth rigid-body simulation.

The body moves with

    dR/dt = R skew(omega)
    dp/dt = R v
    dv/dt = -skew(omega) v + R^T g + a

where ``omega`` and ``a`` are the gyro and accelerometer readings. The
accelerometer reading is synthesized from an analytic position profile as
``a = R^T (p''(t) - g)``, so the only integrated quantity that is not known
in closed form is the attitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .geometry import Array, orthonormalize, skew

GRAVITY = np.array([0.0, 0.0, -9.81])

VecFn = Callable[[float], Array]


@dataclass(frozen=True)
class TrajectorySpec:
    """Analytic position profile with its first two derivatives and a gyro drive."""

    position: VecFn
    velocity: VecFn
    acceleration: VecFn
    omega: VecFn
    gravity: Array = field(default_factory=lambda: GRAVITY.copy())
    name: str = "custom"


@dataclass(frozen=True)
class RigidBodyState:
    R: Array
    p: Array
    v: Array
    t: float = 0.0


@dataclass(frozen=True)
class ImuSample:
    t: float
    omega: Array
    accel: Array


def figure_eight_trajectory() -> TrajectorySpec:
    """The '8'-shaped flight ``p(t) = 2 [sin t, sin t cos t, 1]`` with its gyro drive."""

    def position(t):
        return 2.0 * np.array([np.sin(t), np.sin(t) * np.cos(t), np.ones_like(t)])

    def velocity(t):
        return 2.0 * np.array([np.cos(t), np.cos(2.0 * t), np.zeros_like(t)])

    def acceleration(t):
        return 2.0 * np.array([-np.sin(t), -2.0 * np.sin(2.0 * t), np.zeros_like(t)])

    def omega(t):
        return np.array([-np.cos(2.0 * t), np.ones_like(t), np.sin(2.0 * t)])

    return TrajectorySpec(position, velocity, acceleration, omega, GRAVITY.copy(), "figure_eight")


def straight_line_trajectory(start, velocity, gravity=GRAVITY) -> TrajectorySpec:
    """Constant-velocity flight without rotation (the degenerate-excitation case)."""
    start = np.asarray(start, dtype=float)
    vel = np.asarray(velocity, dtype=float)
    zero = np.zeros(3)
    return TrajectorySpec(
        position=lambda t: start + t * vel,
        velocity=lambda t: vel.copy(),
        acceleration=lambda t: zero.copy(),
        omega=lambda t: zero.copy(),
        gravity=np.asarray(gravity, dtype=float),
        name="line",
    )


def initial_state(spec: TrajectorySpec, R0=None, t0: float = 0.0) -> RigidBodyState:
    """State at ``t0`` consistent with the analytic profile: ``v = R^T p'(t0)``."""
    R0 = np.eye(3) if R0 is None else np.asarray(R0, dtype=float)
    return RigidBodyState(R0, spec.position(t0), R0.T @ spec.velocity(t0), t0)


def synthesize_imu(spec: TrajectorySpec, state: RigidBodyState) -> ImuSample:
    """Gyro and accelerometer readings for ``state`` on ``spec``."""
    t = state.t
    accel = state.R.T @ (spec.acceleration(t) - spec.gravity)
    return ImuSample(t, spec.omega(t), accel)


ImuSource = Union[ImuSample, Callable[[float, Array], ImuSample]]


def _derivative(R, v, imu: ImuSample, g):
    W = skew(imu.omega)
    return R @ W, R @ v, -W @ v + R.T @ g + imu.accel


def step_truth(state: RigidBodyState, imu: ImuSource, dt: float, gravity=GRAVITY) -> RigidBodyState:
    """
    Advance the rigid-body kinematics by one RK4 step.

    Parameters
    ----------
    state : RigidBodyState
    imu : ImuSample or callable
        Either a sample held constant over the step, or ``imu(t, R)`` returning
        the sample at stage time ``t`` for stage attitude ``R``.
    dt : float
        Step size, strictly positive.

    Returns
    -------
    RigidBodyState
        The new state, attitude projected back onto SO(3).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    for name, arr in (("R", state.R), ("p", state.p), ("v", state.v)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite state component {name}")
    sample = imu if callable(imu) else (lambda t, R: imu)
    g = np.asarray(gravity, dtype=float)
    R, p, v, t = state.R, state.p, state.v, state.t
    h = 0.5 * dt

    dR1, dp1, dv1 = _derivative(R, v, sample(t, R), g)
    R2, v2 = R + h * dR1, v + h * dv1
    dR2, dp2, dv2 = _derivative(R2, v2, sample(t + h, R2), g)
    R3, v3 = R + h * dR2, v + h * dv2
    dR3, dp3, dv3 = _derivative(R3, v3, sample(t + h, R3), g)
    R4, v4 = R + dt * dR3, v + dt * dv3
    dR4, dp4, dv4 = _derivative(R4, v4, sample(t + dt, R4), g)

    c = dt / 6.0
    R_new = orthonormalize(R + c * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4))
    p_new = p + c * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
    v_new = v + c * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
    return RigidBodyState(R_new, p_new, v_new, t + dt)


@dataclass
class TruthTrace:
    """Ground truth sampled on a uniform grid ``t[k] = k * h``."""

    t: Array  # (K,)
    R: Array  # (K, 3, 3)
    p: Array  # (K, 3)
    v: Array  # (K, 3)
    omega: Array  # (K, 3)
    accel: Array  # (K, 3)
    gravity: Array

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def eta(self) -> Array:
        """Body-frame gravity ``R^T g`` per sample."""
        return np.einsum("kji,j->ki", self.R, self.gravity)


def _sample(fn: VecFn, ts: Array) -> Array:
    """Evaluate a vector profile at many times, vectorized when the profile allows."""
    try:
        out = np.asarray(fn(ts), dtype=float)
        if out.shape == (3, ts.size):
            return out.T.copy()
    except (TypeError, ValueError):
        pass
    return np.array([fn(t) for t in ts], dtype=float).reshape(ts.size, 3)


def simulate_truth(spec: TrajectorySpec, horizon: float, step: float, R0=None) -> TruthTrace:
    """
    Integrate the truth on ``[0, horizon]`` with RK4 step ``step``.

    The accelerometer reading at every RK stage is synthesized from the stage
    attitude, which makes the integrated ``p`` track ``spec.position``. The
    result is identical to chaining ``step_truth`` with that IMU source; the
    loop is specialized because it dominates simulation cost.
    """
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    n = int(round(horizon / step))
    if abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be a multiple of the step")
    g = np.asarray(spec.gravity, dtype=float)
    K = n + 1
    t = np.arange(K) * step
    t_half = (np.arange(2 * n + 1) * 0.5) * step
    W = skew(_sample(spec.omega, t_half))
    acc = _sample(spec.acceleration, t_half)  # p''(t); the body sees R^T p''

    state = initial_state(spec, R0)
    R = np.empty((K, 3, 3))
    p = np.empty((K, 3))
    v = np.empty((K, 3))
    Rk, pk, vk = state.R, state.p, state.v
    R[0], p[0], v[0] = Rk, pk, vk
    h = 0.5 * step
    c = step / 6.0
    for k in range(n):
        j = 2 * k
        W1, W2, W3 = W[j], W[j + 1], W[j + 2]
        a1, a2, a3 = acc[j], acc[j + 1], acc[j + 2]
        dR1 = Rk @ W1
        dp1 = Rk @ vk
        dv1 = a1 @ Rk - W1 @ vk
        R2, v2 = Rk + h * dR1, vk + h * dv1
        dR2 = R2 @ W2
        dp2 = R2 @ v2
        dv2 = a2 @ R2 - W2 @ v2
        R3, v3 = Rk + h * dR2, vk + h * dv2
        dR3 = R3 @ W2
        dp3 = R3 @ v3
        dv3 = a2 @ R3 - W2 @ v3
        R4, v4 = Rk + step * dR3, vk + step * dv3
        dR4 = R4 @ W3
        dp4 = R4 @ v4
        dv4 = a3 @ R4 - W3 @ v4
        Rk = Rk + c * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4)
        # one polar Newton iteration; the drift per step is far below its basin
        Rk = 1.5 * Rk - 0.5 * Rk @ (Rk.T @ Rk)
        pk = pk + c * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
        vk = vk + c * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
        R[k + 1], p[k + 1], v[k + 1] = Rk, pk, vk
    omega = _sample(spec.omega, t)
    accel = np.einsum("kji,kj->ki", R, acc[::2] - g)
    return TruthTrace(t, R, p, v, omega, accel, g)
