"""
Scenario orchestration: truth simulation, the Riccati observer and one or
more pose observers run as an explicit one-way cascade.

Truth is integrated on a half-step grid so that every RK4 stage of the
observers sees measurements at its own stage time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TrajectorySpec, TruthTrace, simulate_truth
from .geometry import Array, attitude_distance, exp_so3
from .ltv_observer import RiccatiConfig, RiccatiObserver, StageInput, lyapunov_value, truth_state
from .pose_observer import (
    AnchorSet,
    PoseEstimate,
    PoseGains,
    PoseStage,
    innovations,
    pose_error,
    pose_step,
    reconstruct_landmarks,
)
from .sensors import CameraRig, LandmarkMap, measure

log = logging.getLogger(__name__)


@dataclass
class Measurements:
    """Per-grid-point sensor data derived from a truth trace."""

    truth: TruthTrace
    landmarks: LandmarkMap
    rig: CameraRig
    fov_half_angle: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def stage(self, k: int) -> StageInput:
        s = self._cache.get(k)
        if s is None:
            tr = self.truth
            bp = (self.landmarks.positions - tr.p[k]) @ tr.R[k]
            s = StageInput(tr.omega[k], tr.accel[k], measure(self.rig, tr.t[k], bp, self.fov_half_angle))
            self._cache.clear()
            self._cache[k] = s
        return s

    def state(self, k: int) -> Array:
        tr = self.truth
        return truth_state(tr.R[k], tr.p[k], tr.v[k], self.landmarks.positions, tr.gravity)


@dataclass
class CascadeResult:
    """Traces of one run, sampled every ``stride`` observer steps."""

    t: Array
    truth_R: Array
    truth_p: Array
    truth_v: Array
    x_true: Array  # (K, n)
    xhat: Array  # (K, n)
    P_eig_min: Array
    P_eig_max: Array
    P_asym: Array
    lyapunov: Array
    Rhat: Array  # (K, B, 3, 3)
    phat: Array  # (K, B, 3)
    sigma_R: Array  # (K, B, 3)
    sigma_p: Array
    att_err: Array  # (K, B)
    pos_err: Array  # (K, B) ||phat - p||
    ptilde_norm: Array  # (K, B)
    landmark_hat: Array  # (K, B, N, 3)
    landmarks: LandmarkMap
    anchors: AnchorSet
    gravity: Array
    P_final: Array

    @property
    def xtilde(self) -> Array:
        return self.x_true - self.xhat

    @property
    def xtilde_norm(self) -> Array:
        return np.linalg.norm(self.xtilde, axis=1)


def initial_attitudes(angles, axes) -> Array:
    """``exp(angle * axis)`` for matching lists of angles (rad) and unit axes."""
    axes = np.asarray(axes, dtype=float).reshape(-1, 3)
    angles = np.asarray(angles, dtype=float).reshape(-1)
    axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
    return exp_so3(angles[:, None] * axes)


def run_cascade(
    spec: TrajectorySpec,
    landmarks: LandmarkMap,
    rig: CameraRig,
    riccati: RiccatiConfig,
    anchors: AnchorSet,
    gains: PoseGains,
    horizon: float,
    dt: float,
    Rhat0: Array,
    phat0: Array | None = None,
    xhat0: Array | None = None,
    stride: int = 1,
    n_check: int = 100,
    fov_half_angle: float | None = None,
    truth: TruthTrace | None = None,
) -> CascadeResult:
    """
    Simulate truth and the full observer cascade on ``[0, horizon]``.

    ``Rhat0`` may be a single rotation or a stack ``(B, 3, 3)``; all pose
    observers share one Riccati observer, which does not depend on them.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if horizon < 0.0:
        raise ValueError("horizon must be non-negative")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be a multiple of dt")
    if truth is None:
        truth = simulate_truth(spec, n_steps * dt, 0.5 * dt) if n_steps else _single_sample(spec)
    meas = Measurements(truth, landmarks, rig, fov_half_angle)

    Rhat = np.asarray(Rhat0, dtype=float).reshape(-1, 3, 3).copy()
    n_pose = Rhat.shape[0]
    phat = np.zeros((n_pose, 3)) if phat0 is None else np.broadcast_to(np.asarray(phat0, dtype=float), (n_pose, 3)).copy()
    pose = PoseEstimate(Rhat, phat)
    M = landmarks.known_count
    N = landmarks.count
    ltv = RiccatiObserver(riccati, xhat0, n_check)

    rows = list(range(0, n_steps + 1, stride))
    if rows[-1] != n_steps:
        rows.append(n_steps)
    K = len(rows)
    n = riccati.V.shape[0]
    out = {
        "t": np.empty(K),
        "truth_R": np.empty((K, 3, 3)),
        "truth_p": np.empty((K, 3)),
        "truth_v": np.empty((K, 3)),
        "x_true": np.empty((K, n)),
        "xhat": np.empty((K, n)),
        "P_eig_min": np.empty(K),
        "P_eig_max": np.empty(K),
        "P_asym": np.empty(K),
        "lyapunov": np.empty(K),
        "Rhat": np.empty((K, n_pose, 3, 3)),
        "phat": np.empty((K, n_pose, 3)),
        "sigma_R": np.empty((K, n_pose, 3)),
        "sigma_p": np.empty((K, n_pose, 3)),
        "att_err": np.empty((K, n_pose)),
        "pos_err": np.empty((K, n_pose)),
        "ptilde_norm": np.empty((K, n_pose)),
        "landmark_hat": np.empty((K, n_pose, N, 3)),
    }
    row = 0

    def record(j):
        nonlocal row
        g = 2 * j
        x_true = meas.state(g)
        P = ltv.P
        eig = np.linalg.eigvalsh(P)
        est_lm = ltv.xhat[: 3 * N].reshape(N, 3)
        sR, sp = innovations(anchors, pose, np.broadcast_to(est_lm[:M], (n_pose, M, 3)))
        err = pose_error(truth.R[g], truth.p[g], pose, anchors)
        out["t"][row] = j * dt
        out["truth_R"][row] = truth.R[g]
        out["truth_p"][row] = truth.p[g]
        out["truth_v"][row] = truth.v[g]
        out["x_true"][row] = x_true
        out["xhat"][row] = ltv.xhat
        out["P_eig_min"][row] = eig[0]
        out["P_eig_max"][row] = eig[-1]
        out["P_asym"][row] = np.abs(P - P.T).max()
        out["lyapunov"][row] = lyapunov_value(x_true - ltv.xhat, P)
        out["Rhat"][row] = pose.Rhat
        out["phat"][row] = pose.phat
        out["sigma_R"][row] = sR
        out["sigma_p"][row] = sp
        out["att_err"][row] = attitude_distance(err.Rtilde)
        out["pos_err"][row] = np.linalg.norm(pose.phat - truth.p[g], axis=-1)
        out["ptilde_norm"][row] = np.linalg.norm(err.ptilde, axis=-1)
        out["landmark_hat"][row] = reconstruct_landmarks(pose, np.broadcast_to(est_lm, (n_pose, N, 3)))
        row += 1

    record(0)
    next_row = 1
    for j in range(n_steps):
        g = 2 * j
        s0, s1, s2 = meas.stage(g), meas.stage(g + 1), meas.stage(g + 2)
        xs = ltv.step((s0, s1, s2), dt)
        omegas = (s0.omega, s1.omega, s1.omega, s2.omega)
        pstages = [
            PoseStage(w, x[3 * N : 3 * N + 3], x[: 3 * M].reshape(M, 3)) for w, x in zip(omegas, xs)
        ]
        pose = pose_step(pose, pstages, gains, anchors, dt)
        if next_row < K and rows[next_row] == j + 1:
            record(j + 1)
            next_row += 1
    return CascadeResult(**out, landmarks=landmarks, anchors=anchors, gravity=truth.gravity, P_final=ltv.P.copy())


def _single_sample(spec: TrajectorySpec) -> TruthTrace:
    from .dynamics import initial_state, synthesize_imu

    s = initial_state(spec)
    imu = synthesize_imu(spec, s)
    return TruthTrace(
        np.zeros(1), s.R[None], s.p[None], s.v[None], imu.omega[None], imu.accel[None], np.asarray(spec.gravity, dtype=float)
    )
