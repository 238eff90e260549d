import numpy as np
import pytest

from riccati_cascade.dynamics import (
    GRAVITY,
    ImuSample,
    RigidBodyState,
    figure_eight_trajectory,
    initial_state,
    simulate_truth,
    step_truth,
    straight_line_trajectory,
    synthesize_imu,
)
from riccati_cascade.geometry import exp_so3, is_rotation, skew


@pytest.fixture(scope="module")
def spec():
    return figure_eight_trajectory()


def test_figure_eight_initial_values(spec):
    np.testing.assert_allclose(spec.position(0.0), [0.0, 0.0, 2.0])
    np.testing.assert_allclose(spec.velocity(0.0), [2.0, 2.0, 0.0])
    np.testing.assert_allclose(spec.omega(0.0), [-1.0, 1.0, 0.0])
    s = initial_state(spec)
    np.testing.assert_allclose(s.v, [2.0, 2.0, 0.0])


def test_figure_eight_derivatives_are_consistent(spec):
    h = 1e-5
    for t in np.linspace(0.0, 6.0, 13):
        dp = (spec.position(t + h) - spec.position(t - h)) / (2 * h)
        dv = (spec.velocity(t + h) - spec.velocity(t - h)) / (2 * h)
        np.testing.assert_allclose(dp, spec.velocity(t), atol=1e-8)
        np.testing.assert_allclose(dv, spec.acceleration(t), atol=1e-8)


def test_imu_at_start(spec):
    imu = synthesize_imu(spec, initial_state(spec))
    np.testing.assert_allclose(imu.accel, [0.0, 0.0, 9.81], atol=1e-15)
    np.testing.assert_allclose(imu.omega, [-1.0, 1.0, 0.0])


def test_imu_without_force():
    line = straight_line_trajectory([0.0, 0.0, 1.0], [1.0, 0.5, 0.0], gravity=np.zeros(3))
    imu = synthesize_imu(line, initial_state(line, exp_so3([0.1, 0.2, 0.3]), t0=2.0))
    np.testing.assert_array_equal(imu.accel, np.zeros(3))


def test_hover_keeps_velocity():
    R = exp_so3([0.2, -0.4, 0.1])
    s = RigidBodyState(R, np.array([1.0, 2.0, 3.0]), np.array([0.3, -0.1, 0.2]))
    imu = ImuSample(0.0, np.zeros(3), -R.T @ GRAVITY)
    out = step_truth(s, imu, 0.01)
    np.testing.assert_allclose(out.v, s.v, atol=1e-15)
    np.testing.assert_allclose(out.p, s.p + R @ s.v * 0.01, atol=1e-15)
    np.testing.assert_allclose(out.R, R, atol=1e-15)


def test_pure_rotation_keeps_speed():
    # a = -R^T g cancels gravity, leaving dv/dt = -omega x v, orthogonal to v
    omega = np.array([0.0, 0.0, 1.0])

    def imu(t, R):
        return ImuSample(t, omega, -R.T @ GRAVITY)

    s = RigidBodyState(np.eye(3), np.zeros(3), np.array([1.0, 2.0, 0.5]))
    speed = np.linalg.norm(s.v)
    for _ in range(500):
        s = step_truth(s, imu, 0.01)
    assert abs(np.linalg.norm(s.v) - speed) < 1e-10
    np.testing.assert_allclose(s.R, exp_so3(5.0 * omega), atol=1e-9)


def test_step_rejects_bad_input():
    s = RigidBodyState(np.eye(3), np.zeros(3), np.zeros(3))
    imu = ImuSample(0.0, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        step_truth(s, imu, 0.0)
    with pytest.raises(ValueError):
        step_truth(RigidBodyState(np.eye(3), np.array([np.nan, 0, 0]), np.zeros(3)), imu, 0.1)


def test_reaches_analytic_position_at_pi(spec):
    tr = simulate_truth(spec, np.pi, np.pi / 3000)
    np.testing.assert_allclose(tr.p[-1], [0.0, 0.0, 2.0], atol=1e-6)


def test_specialized_loop_matches_step_truth(spec):
    dt = 1e-2
    tr = simulate_truth(spec, 0.5, dt)

    def imu(t, R):
        return synthesize_imu(spec, RigidBodyState(R, np.zeros(3), np.zeros(3), t))

    s = initial_state(spec)
    for k in range(50):
        s = step_truth(s, imu, dt, spec.gravity)
    np.testing.assert_allclose(s.R, tr.R[-1], atol=1e-12)
    np.testing.assert_allclose(s.p, tr.p[-1], atol=1e-12)
    np.testing.assert_allclose(s.v, tr.v[-1], atol=1e-12)


def test_accelerometer_inverts_synthesis(spec):
    tr = simulate_truth(spec, 5.0, 1e-3)
    pdd = np.array([spec.acceleration(t) for t in tr.t])
    resid = np.einsum("kij,kj->ki", tr.R, tr.accel) + tr.gravity - pdd
    assert np.abs(resid).max() < 1e-12


def test_position_tracks_profile_with_fourth_order_error(spec):
    errs = []
    for dt in (0.04, 0.02):
        tr = simulate_truth(spec, 4.0, dt)
        errs.append(np.linalg.norm(tr.p[-1] - spec.position(4.0)))
    assert 12.0 < errs[0] / errs[1] < 20.0


def test_attitude_stays_on_so3_for_a_minute(spec):
    tr = simulate_truth(spec, 60.0, 5e-3)
    assert is_rotation(tr.R, 1e-9)
    assert is_rotation(tr.R[-1], 1e-12)


def test_body_gravity_kinematics(spec):
    tr = simulate_truth(spec, 4.0, 1e-3)
    eta = tr.eta
    d_eta = (eta[2:] - eta[:-2]) / (2e-3)
    rhs = -np.einsum("kij,kj->ki", skew(tr.omega[1:-1]), eta[1:-1])
    assert np.abs(d_eta - rhs).max() < 1e-4


def test_velocity_is_body_frame_profile_velocity(spec):
    tr = simulate_truth(spec, 3.0, 1e-3)
    pd = np.array([spec.velocity(t) for t in tr.t])
    np.testing.assert_allclose(np.einsum("kij,kj->ki", tr.R, tr.v), pd, atol=1e-9)


def test_horizon_must_be_multiple_of_step(spec):
    with pytest.raises(ValueError):
        simulate_truth(spec, 1.0005, 1e-3)
    with pytest.raises(ValueError):
        simulate_truth(spec, 1.0, -1e-3)


def test_line_profile_is_scalar_callable():
    line = straight_line_trajectory([1.0, 2.0, 3.0], [0.0, 0.0, -0.5])
    tr = simulate_truth(line, 1.0, 0.01)
    np.testing.assert_allclose(tr.p[-1], [1.0, 2.0, 2.5], atol=1e-12)
    np.testing.assert_array_equal(tr.omega, 0.0)
    np.testing.assert_allclose(tr.accel, np.tile([0.0, 0.0, 9.81], (tr.t.size, 1)), atol=1e-12)
