"""
Riccati observer for body-frame landmarks, velocity and body-frame gravity.

The extended state is ``x = [bp_1, ..., bp_N, v, eta]`` (length ``3N + 6``)
with linear time-varying dynamics

    dx/dt = A(omega) x + B a,        y = C(z) x

where ``y`` stacks the projector outputs of the bearings. The observer is

    dxhat/dt = A xhat + B a + K (y - C xhat),   K = P C^T Q
    dP/dt    = A P + P A^T - P C^T Q C P + V

Both are integrated jointly with classical RK4, feeding each stage the
measurements at the stage time (start, midpoint, end of the step).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import Array, skew
from .sensors import BearingSample, CameraRig, modified_output


class LostPositivity(RuntimeError):
    """The Riccati matrix stopped being positive definite."""


def state_dim(n_landmarks: int) -> int:
    return 3 * n_landmarks + 6


@dataclass
class ExtendedState:
    """Split view of the ``3N + 6`` state vector."""

    x_L: Array  # (N, 3)
    v: Array
    eta: Array

    @classmethod
    def from_vector(cls, x: Array) -> "ExtendedState":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or (x.size - 6) % 3 or x.size < 15:
            raise ValueError(f"invalid extended-state length {x.size}")
        return cls(x[:-6].reshape(-1, 3), x[-6:-3], x[-3:])

    @property
    def vector(self) -> Array:
        return np.concatenate([np.ravel(self.x_L), self.v, self.eta])

    @property
    def count(self) -> int:
        return self.x_L.shape[0]


def truth_state(R: Array, p: Array, v: Array, landmarks: Array, gravity: Array) -> Array:
    """Extended state of the true body: ``[R^T (p_i - p), v, R^T g]``."""
    bp = (landmarks - p) @ R
    return np.concatenate([bp.ravel(), v, R.T @ gravity])


@dataclass(frozen=True)
class LtvMatrices:
    A: Array
    B: Array
    C: Array
    A_omega: Array
    Gamma: Array
    Lambda: Array


@dataclass(frozen=True)
class RiccatiConfig:
    Q: Array
    V: Array
    P0: Array
    Q_fast: Array | float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("Q", "V", "P0"):
            M = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, M)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.abs(M - M.T).max() > 1e-12 * max(1.0, np.abs(M).max()):
                raise ValueError(f"{name} must be symmetric")
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} must be positive definite") from None
        n = self.V.shape[0]
        if self.P0.shape[0] != n or self.Q.shape[0] != n - 6:
            raise ValueError("Q, V, P0 dimensions are inconsistent")
        object.__setattr__(self, "Q_fast", _scalar_or(self.Q))

    @classmethod
    def isotropic(cls, n_landmarks: int, q: float = 1e-4, v: float = 1e6, p0: float = 1.0) -> "RiccatiConfig":
        n = state_dim(n_landmarks)
        return cls(q * np.eye(n - 6), v * np.eye(n), p0 * np.eye(n))

    @property
    def n_landmarks(self) -> int:
        return (self.V.shape[0] - 6) // 3


@dataclass(frozen=True)
class RiccatiState:
    P: Array
    K: Array


@dataclass(frozen=True)
class StageInput:
    """Measurements available at one RK stage time."""

    omega: Array
    accel: Array
    bearings: BearingSample


def coupling_matrix(n_landmarks: int) -> Array:
    """The constant nilpotent part ``Abar`` of ``A`` (``Abar^3 = 0``)."""
    return _templates(n_landmarks)[0]


@lru_cache(maxsize=8)
def _templates(n_landmarks: int):
    """Constant parts of ``A``: the nilpotent coupling block and the rotation basis."""
    N = n_landmarks
    n = state_dim(N)
    Abar = np.zeros((n, n))
    Abar[: 3 * N, 3 * N : 3 * N + 3] = -np.tile(np.eye(3), (N, 1))
    Abar[3 * N : 3 * N + 3, 3 * N + 3 :] = np.eye(3)
    basis = np.stack([np.kron(np.eye(N + 2), skew(e)) for e in np.eye(3)])
    # flat positions of the diagonal 3x3 blocks inside C (3N x n)
    r = np.arange(3 * N)
    blk = 3 * (r // 3)
    c_idx = (r[:, None] * n + blk[:, None] + np.arange(3)[None, :]).ravel()
    for b in (Abar, basis, c_idx):
        b.setflags(write=False)
    return Abar, basis, c_idx


def a_matrix(omega: Array, n_landmarks: int) -> Array:
    """State matrix ``A(omega) = Abar - blkdiag(skew(omega), ...)``."""
    Abar, basis, _ = _templates(n_landmarks)
    return Abar - np.tensordot(omega, basis, axes=1)


def _c_matrix(Pi: Array) -> Array:
    N = Pi.shape[0]
    _, _, c_idx = _templates(N)
    C = np.zeros((3 * N, state_dim(N)))
    C.flat[c_idx] = Pi.ravel()
    return C


def build_system(omega, bearings, rig: CameraRig | None = None) -> LtvMatrices:
    """
    Assemble ``A, B, C`` at one instant.

    ``bearings`` is either a ``BearingSample`` or an ``(N, 3)`` array of raw
    camera-frame bearings, in which case ``rig`` supplies ``R_c``.
    """
    if isinstance(bearings, BearingSample):
        Pi = bearings.Pi
    else:
        if rig is None:
            raise ValueError("raw bearings need a camera rig")
        Pi, _ = modified_output(rig, np.asarray(bearings, dtype=float))
    if Pi.ndim != 3 or Pi.shape[1:] != (3, 3):
        raise ValueError("bearing projectors must have shape (N, 3, 3)")
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,):
        raise ValueError("omega must be a 3-vector")
    N = Pi.shape[0]
    n = state_dim(N)
    Abar = _templates(N)[0]
    A = a_matrix(omega, N)
    B = np.zeros((n, 3))
    B[3 * N : 3 * N + 3] = np.eye(3)
    C = _c_matrix(Pi)
    return LtvMatrices(A, B, C, -A[: 3 * N, : 3 * N], -Abar[: 3 * N, 3 * N : 3 * N + 3], C[:, : 3 * N].copy())


class _Stage:
    """Precomputed per-stage operands for the joint RK4 right-hand side."""

    __slots__ = ("A", "C", "y", "accel")

    def __init__(self, inp: StageInput):
        Pi = inp.bearings.Pi
        self.A = a_matrix(np.asarray(inp.omega, dtype=float), Pi.shape[0])
        self.C = _c_matrix(Pi)
        self.y = inp.bearings.y.ravel()
        self.accel = np.asarray(inp.accel, dtype=float)


def _expand(stages) -> list:
    """Normalize stage inputs to the four RK4 stage operands."""
    if isinstance(stages, StageInput):
        s = _Stage(stages)
        return [s, s, s, s]
    if isinstance(stages, LtvMatrices):
        return [stages] * 4
    stages = list(stages)
    if len(stages) == 3:
        first, mid, last = (_Stage(s) if isinstance(s, StageInput) else s for s in stages)
        return [first, mid, mid, last]
    if len(stages) == 4:
        return [_Stage(s) if isinstance(s, StageInput) else s for s in stages]
    raise ValueError("stages must be one input, or (start, mid, end), or four RK stages")


def _riccati_rhs(P, A, C, Q, V):
    AP = A @ P
    CP = C @ P
    K = (Q * CP).T if np.ndim(Q) == 0 else (Q @ CP).T
    dP = AP + AP.T
    dP -= K @ CP
    dP += V
    return dP, K


def _scalar_or(M: Array):
    """``M`` as a scalar when it is a multiple of the identity, else unchanged."""
    d = M[0, 0]
    return float(d) if np.array_equal(M, d * np.eye(M.shape[0])) else M


def _observer_rhs(x, K, s, n_lm):
    dx = s.A @ x + K @ (s.y - s.C @ x)
    dx[3 * n_lm : 3 * n_lm + 3] += s.accel
    return dx


def gain(P: Array, C: Array, Q) -> Array:
    """Observer gain ``K = P C^T Q``."""
    return (P @ C.T) * Q if np.ndim(Q) == 0 else P @ C.T @ Q


def check_positive(P: Array) -> None:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise LostPositivity("Riccati matrix is no longer positive definite") from None


def riccati_step(rs: RiccatiState, systems, cfg: RiccatiConfig, dt: float, check: bool = True) -> RiccatiState:
    """
    Advance ``P`` by one RK4 step of the continuous Riccati equation.

    ``systems`` is one ``LtvMatrices`` (held over the step), three of them
    (step start, midpoint, end), or ``StageInput`` objects.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    st = _expand(systems)
    Q, V = _scalar_or(cfg.Q), cfg.V
    P = rs.P
    k1, _ = _riccati_rhs(P, st[0].A, st[0].C, Q, V)
    k2, _ = _riccati_rhs(P + 0.5 * dt * k1, st[1].A, st[1].C, Q, V)
    k3, _ = _riccati_rhs(P + 0.5 * dt * k2, st[2].A, st[2].C, Q, V)
    k4, _ = _riccati_rhs(P + dt * k3, st[3].A, st[3].C, Q, V)
    P = P + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    P = 0.5 * (P + P.T)
    if check:
        check_positive(P)
    return RiccatiState(P, gain(P, st[3].C, Q))


def propagate_riccati(cfg: RiccatiConfig, omega: Array, projectors: Array, dt: float, chunk: int = 512) -> Array:
    """
    Integrate only the Riccati equation over a sampled trace.

    ``omega`` (shape ``(2n+1, 3)``) and ``projectors`` (``(2n+1, N, 3, 3)``)
    are given on the half-step grid, so step ``j`` uses samples ``2j``,
    ``2j+1`` and ``2j+2``. Stage matrices are assembled a chunk at a time,
    which makes very fine reference solutions affordable. Returns ``P`` after
    ``n`` steps.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    omega = np.asarray(omega, dtype=float)
    Pi = np.asarray(projectors, dtype=float)
    if omega.shape[0] != Pi.shape[0] or omega.shape[0] % 2 != 1:
        raise ValueError("need matching half-step samples of odd length")
    N = Pi.shape[1]
    n_steps = (omega.shape[0] - 1) // 2
    _, _, c_idx = _templates(N)
    Q, V = cfg.Q_fast, cfg.V
    n = V.shape[0]
    P = cfg.P0.copy()
    h = 0.5 * dt
    for j0 in range(0, n_steps, chunk):
        j1 = min(n_steps, j0 + chunk)
        sl = slice(2 * j0, 2 * j1 + 1)
        A = a_matrix(omega[sl], N)
        C = np.zeros((A.shape[0], 3 * N * n))
        C[:, c_idx] = Pi[sl].reshape(A.shape[0], -1)
        C = C.reshape(-1, 3 * N, n)
        for j in range(j1 - j0):
            a, m, b = 2 * j, 2 * j + 1, 2 * j + 2
            k1, _ = _riccati_rhs(P, A[a], C[a], Q, V)
            k2, _ = _riccati_rhs(P + h * k1, A[m], C[m], Q, V)
            k3, _ = _riccati_rhs(P + h * k2, A[m], C[m], Q, V)
            k4, _ = _riccati_rhs(P + dt * k3, A[b], C[b], Q, V)
            P = P + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            P = 0.5 * (P + P.T)
    check_positive(P)
    return P


def observer_step(xhat: Array, rs: RiccatiState, stages, cfg: RiccatiConfig, dt: float, check: bool = True):
    """
    One joint RK4 step of the state estimate and the Riccati matrix.

    Parameters
    ----------
    xhat : ndarray, shape (3N+6,)
    rs : RiccatiState
        Riccati matrix at the step start.
    stages : StageInput or sequence of StageInput
        A single input (held over the step) or inputs at the step start,
        midpoint and end.
    cfg : RiccatiConfig
    dt : float

    Returns
    -------
    xhat_new : ndarray
    rs_new : RiccatiState
    stage_states : list of ndarray
        The four RK4 stage arguments ``x_n, x_n + dt/2 k1, x_n + dt/2 k2,
        x_n + dt k3``. Downstream observers integrated with the same scheme
        consume these to stay consistent to fourth order.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    xhat = np.asarray(xhat, dtype=float)
    if not np.all(np.isfinite(xhat)):
        raise ValueError("non-finite state estimate")
    st = _expand(stages)
    n_lm = cfg.n_landmarks
    if xhat.shape != (state_dim(n_lm),):
        raise ValueError("state estimate dimension does not match the configuration")
    Q, V = cfg.Q_fast, cfg.V
    h = 0.5 * dt

    P1, x1 = rs.P, xhat
    dP1, K1 = _riccati_rhs(P1, st[0].A, st[0].C, Q, V)
    dx1 = _observer_rhs(x1, K1, st[0], n_lm)
    P2, x2 = P1 + h * dP1, xhat + h * dx1
    dP2, K2 = _riccati_rhs(P2, st[1].A, st[1].C, Q, V)
    dx2 = _observer_rhs(x2, K2, st[1], n_lm)
    P3, x3 = P1 + h * dP2, xhat + h * dx2
    dP3, K3 = _riccati_rhs(P3, st[2].A, st[2].C, Q, V)
    dx3 = _observer_rhs(x3, K3, st[2], n_lm)
    P4, x4 = P1 + dt * dP3, xhat + dt * dx3
    dP4, K4 = _riccati_rhs(P4, st[3].A, st[3].C, Q, V)
    dx4 = _observer_rhs(x4, K4, st[3], n_lm)

    c = dt / 6.0
    x_new = xhat + c * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
    P = P1 + c * (dP1 + 2.0 * dP2 + 2.0 * dP3 + dP4)
    P = 0.5 * (P + P.T)
    if check:
        check_positive(P)
    return x_new, RiccatiState(P, gain(P, st[3].C, Q)), [x1, x2, x3, x4]


def observer_rhs(xhat: Array, K: Array, omega, accel, bearings: BearingSample) -> Array:
    """Stacked right-hand side ``A xhat + B a + K (y - C xhat)``."""
    m = build_system(omega, bearings)
    return m.A @ xhat + m.B @ np.asarray(accel, dtype=float) + K @ (bearings.y.ravel() - m.C @ xhat)


def observer_rhs_componentwise(xhat: Array, K: Array, omega, accel, bearings: BearingSample) -> Array:
    """Same right-hand side written per landmark, velocity and gravity block."""
    est = ExtendedState.from_vector(xhat)
    N = est.count
    W = skew(omega)
    innovation = bearings.y.ravel() - np.einsum("nij,nj->ni", bearings.Pi, est.x_L).ravel()
    corr = K @ innovation
    K_lm = corr[: 3 * N].reshape(N, 3)
    d_lm = -est.x_L @ W.T - est.v + K_lm
    d_v = -W @ est.v + est.eta + np.asarray(accel, dtype=float) + corr[3 * N : 3 * N + 3]
    d_eta = -W @ est.eta + corr[3 * N + 3 :]
    return np.concatenate([d_lm.ravel(), d_v, d_eta])


def lyapunov_value(xtilde: Array, P: Array | RiccatiState) -> float:
    """``xtilde^T P^{-1} xtilde`` via a Cholesky solve."""
    if isinstance(P, RiccatiState):
        P = P.P
    try:
        factor = cho_factor(P)
    except np.linalg.LinAlgError:
        raise LostPositivity("Riccati matrix is singular or indefinite") from None
    xtilde = np.asarray(xtilde, dtype=float)
    return float(xtilde @ cho_solve(factor, xtilde))


class RiccatiObserver:
    """
    Stateful wrapper around ``observer_step`` that owns ``xhat`` and ``P``.

    Positivity of ``P`` is verified by a Cholesky factorization every
    ``n_check`` steps.
    """

    def __init__(self, cfg: RiccatiConfig, xhat0: Array | None = None, n_check: int = 100):
        n = cfg.V.shape[0]
        self.cfg = cfg
        self.xhat = np.zeros(n) if xhat0 is None else np.asarray(xhat0, dtype=float).copy()
        if self.xhat.shape != (n,):
            raise ValueError("initial estimate has the wrong dimension")
        self.rs = RiccatiState(cfg.P0.copy(), np.zeros((n, n - 6)))
        self.n_check = max(1, int(n_check))
        self.steps = 0

    def step(self, stages: Sequence[StageInput] | StageInput, dt: float) -> list:
        self.steps += 1
        check = self.steps % self.n_check == 0
        self.xhat, self.rs, stage_states = observer_step(self.xhat, self.rs, stages, self.cfg, dt, check)
        return stage_states

    @property
    def P(self) -> Array:
        return self.rs.P
