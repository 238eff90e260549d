"""
Numerical checks of excitation, observability and stability claims.

Everything here works on recorded traces or re-integrates small auxiliary
systems; nothing feeds back into the observers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .dynamics import TruthTrace
from .geometry import Array, attitude_distance, exp_so3, orthonormalize, proj, psi, skew, unit
from .ltv_observer import a_matrix, coupling_matrix, state_dim
from .pose_observer import AnchorSet, PoseGains
from .sensors import CameraRig, LandmarkMap


class WindowTooShort(ValueError):
    """The integration window cannot be resolved by the trace."""


class NonPositiveTrace(ValueError):
    """A log-linear fit was requested on a trace with non-positive samples."""


# --------------------------------------------------------------------------
# trace helpers


def bearing_directions(truth: TruthTrace, landmarks: LandmarkMap, rig: CameraRig) -> Array:
    """
    Inertial-frame bearings ``z'_i = R R_c z_i``, shape ``(K, N, 3)``.

    These equal the unit vectors from the camera center to the landmarks.
    """
    cam = truth.p + np.einsum("kab,b->ka", truth.R, rig.p_c)
    return unit(landmarks.positions[None, :, :] - cam[:, None, :])


def body_projectors(truth: TruthTrace, landmarks: LandmarkMap, rig: CameraRig) -> Array:
    """Body-frame projectors ``pi(R_c z_i)`` along a trace, shape ``(K, N, 3, 3)``."""
    rel = landmarks.positions[None, :, :] - truth.p[:, None, :]
    bp = np.einsum("kni,kij->knj", rel, truth.R)
    return proj(unit(bp - rig.p_c))


def _uniform_step(t: Array) -> float:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise WindowTooShort("trace needs at least two samples")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if not dt > 0.0 or np.abs(np.diff(t) - dt).max() > 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError("trace must be sampled on a uniform increasing grid")
    return float(dt)


def _steps(length: float, dt: float, what: str) -> int:
    m = int(round(length / dt))
    if abs(m * dt - length) > 1e-9 * max(1.0, length):
        raise ValueError(f"{what} must be a multiple of the sample step")
    return m


def _window_starts(t: Array, dt: float, delta: float, window_step: float) -> tuple[Array, int, int]:
    """Start indices of all windows on the ``window_step`` grid that fit in the trace."""
    m = _steps(delta, dt, "window")
    stride = _steps(window_step, dt, "window step")
    last = t.size - 1 - m
    if last < 0:
        raise WindowTooShort(f"window {delta:g} s is longer than the trace ({t[-1] - t[0]:g} s)")
    return np.arange(0, last + 1, stride), m, stride


# --------------------------------------------------------------------------
# persistency of excitation


@dataclass(frozen=True)
class PeReport:
    delta_o: float
    mu_o: float
    starts: Array  # (W,) window start times
    min_eig: Array  # (W, N)

    @property
    def margin(self) -> Array:
        """Smallest window eigenvalue per landmark."""
        return self.min_eig.min(axis=0)

    @property
    def passed(self) -> Array:
        return self.margin > self.mu_o

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passed))

    def rows(self) -> list[dict]:
        return [
            {"landmark": i, "delta_o": self.delta_o, "mu_o": self.mu_o, "min_eig": float(m), "pass": int(ok)}
            for i, (m, ok) in enumerate(zip(self.margin, self.passed))
        ]


def pe_check(t: ArrayLike, zprime: ArrayLike, delta_o: float, mu_o: float = 1e-6, window_step: float = 0.1) -> PeReport:
    """
    Windowed excitation of each bearing.

    For each window ``[s, s + delta_o]`` on a ``window_step`` grid, the
    smallest eigenvalue of the trapezoidal integral of ``pi(z'_i)`` is
    recorded; a landmark passes when every window exceeds ``mu_o``.

    Parameters
    ----------
    t : array, shape (K,)
        Uniform sample times.
    zprime : array, shape (K, N, 3)
        Unit bearings.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(zprime, dtype=float)
    dt = _uniform_step(t)
    if delta_o < 2.0 * dt:
        raise WindowTooShort(f"window {delta_o:g} s is shorter than two samples ({2 * dt:g} s)")
    starts, m, _ = _window_starts(t, dt, delta_o, window_step)
    P = proj(z)
    # cumulative trapezoid, so each window is a difference of two partial sums
    cum = np.concatenate([np.zeros((1,) + P.shape[1:]), np.cumsum(0.5 * dt * (P[1:] + P[:-1]), axis=0)])
    windows = cum[starts + m] - cum[starts]
    lam = np.linalg.eigvalsh(windows)[..., 0]
    return PeReport(float(delta_o), float(mu_o), t[starts], lam)


# --------------------------------------------------------------------------
# transition matrices and observability Gramians

MatrixFn = Callable[[float], Array]


def transition_matrix(A: MatrixFn | ArrayLike, t0: float, t1: float, dt: float) -> Array:
    """
    ``Phi(t1, t0)`` from ``dPhi/dt = A(t) Phi`` by RK4.

    ``A`` is a callable of time or a constant matrix. A final partial step
    is taken when ``t1 - t0`` is not a multiple of ``dt``.
    """
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    A_fn = A if callable(A) else (lambda _t, _A=np.asarray(A, dtype=float): _A)
    n = A_fn(t0).shape[0]
    Phi = np.eye(n)
    t = t0
    while t1 - t > 1e-12 * max(1.0, abs(t1)):
        h = min(dt, t1 - t)
        Phi = _rk4_transition(A_fn(t), A_fn(t + 0.5 * h), A_fn(t + h), h) @ Phi
        t += h
    return Phi


def _rk4_transition(A0: Array, Am: Array, A1: Array, h: float) -> Array:
    """One-step RK4 propagator for ``dX/dt = A(t) X``."""
    I = np.eye(A0.shape[0])
    k1 = A0
    k2 = Am @ (I + 0.5 * h * k1)
    k3 = Am @ (I + 0.5 * h * k2)
    k4 = A1 @ (I + h * k3)
    return I + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def gramian_window(A: MatrixFn | ArrayLike, C: MatrixFn | ArrayLike, t0: float, delta: float, dt: float) -> Array:
    """
    ``(1/delta) int_{t0}^{t0+delta} Phi(tau, t0)^T C(tau)^T C(tau) Phi(tau, t0) dtau``
    for arbitrary ``A(t)`` and ``C(t)`` (callables or constants), by RK4 and
    the trapezoid rule on a ``dt`` grid. Slow but general; the scenario
    Gramians below exploit structure instead.
    """
    if not delta > 0.0:
        raise ValueError("window must be positive")
    m = _steps(delta, dt, "window")
    A_fn = A if callable(A) else (lambda _t, _A=np.asarray(A, dtype=float): _A)
    C_fn = C if callable(C) else (lambda _t, _C=np.asarray(C, dtype=float): _C)
    Phi = np.eye(A_fn(t0).shape[0])
    CP = C_fn(t0) @ Phi
    W = 0.5 * dt * CP.T @ CP
    for j in range(m):
        t = t0 + j * dt
        Phi = _rk4_transition(A_fn(t), A_fn(t + 0.5 * dt), A_fn(t + dt), dt) @ Phi
        CP = C_fn(t + dt) @ Phi
        W += (0.5 * dt if j == m - 1 else dt) * CP.T @ CP
    return 0.5 * (W + W.T) / delta


@dataclass(frozen=True)
class GramianReport:
    method: str
    delta: float
    starts: Array  # (W,)
    min_eig: Array  # (W,)
    matrices: Array  # (W, n, n)

    def rows(self) -> list[dict]:
        return [
            {"method": self.method, "t": float(s), "delta": self.delta, "min_eig": float(e)}
            for s, e in zip(self.starts, self.min_eig)
        ]


def _output_gram(Pi: Array, Phi: Array) -> Array:
    """``Phi^T C^T C Phi`` with ``C = [blkdiag(Pi) 0 0]``; projectors are idempotent."""
    N = Pi.shape[0]
    CPhi = np.einsum("nij,njk->nik", Pi, Phi[: 3 * N].reshape(N, 3, -1)).reshape(3 * N, -1)
    return CPhi.T @ CPhi


def gramian_direct(
    omega: Callable[[float], Array],
    t: ArrayLike,
    projectors: ArrayLike,
    delta: float = 2.0,
    window_step: float = 0.1,
) -> GramianReport:
    """
    ``W_o(s, s + delta) = (1/delta) int Phi(tau, s)^T C^T C Phi(tau, s) dtau``.

    ``Phi`` is integrated from ``A(omega(t))`` by RK4 on the sample grid and
    the integral is a trapezoid over the samples. The trace is processed in
    ``window_step`` segments: each segment contributes its local Gramian,
    carried to a window start by the product of segment transitions.

    Parameters
    ----------
    omega : callable
        Angular velocity as a function of time (needed at midpoints).
    t : array, shape (K,)
    projectors : array, shape (K, N, 3, 3)
        Body-frame ``pi(R_c z_i)`` at the samples.
    """
    t = np.asarray(t, dtype=float)
    Pi = np.asarray(projectors, dtype=float)
    dt = _uniform_step(t)
    starts, m, stride = _window_starts(t, dt, delta, window_step)
    N = Pi.shape[1]
    n = state_dim(N)
    n_seg = (t.size - 1) // stride
    seg_gram = np.empty((n_seg, n, n))
    seg_trans = np.empty((n_seg, n, n))
    for s in range(n_seg):
        k0 = s * stride
        Phi = np.eye(n)
        G = 0.5 * dt * _output_gram(Pi[k0], Phi)
        for j in range(stride):
            k = k0 + j
            tk = t[k]
            Phi = _rk4_transition(
                a_matrix(omega(tk), N), a_matrix(omega(tk + 0.5 * dt), N), a_matrix(omega(tk + dt), N), dt
            ) @ Phi
            w = 0.5 * dt if j == stride - 1 else dt
            G += w * _output_gram(Pi[k + 1], Phi)
        seg_gram[s] = G
        seg_trans[s] = Phi
    per_window = m // stride
    mats = np.empty((starts.size, n, n))
    for w, k0 in enumerate(starts):
        s0 = k0 // stride
        T = np.eye(n)
        W = np.zeros((n, n))
        for s in range(s0, s0 + per_window):
            W += T.T @ seg_gram[s] @ T
            T = seg_trans[s] @ T
        mats[w] = 0.5 * (W + W.T) / delta
    return GramianReport("direct", float(delta), t[starts], np.linalg.eigvalsh(mats)[:, 0], mats)


def frame_rotation(R: ArrayLike, n_landmarks: int) -> Array:
    """``T = blkdiag(R^T, ..., R^T)`` with ``N + 2`` blocks."""
    return np.kron(np.eye(n_landmarks + 2), np.asarray(R, dtype=float).T)


def nilpotent_exp(n_landmarks: int, s: float) -> Array:
    """``exp(Abar s) = I + Abar s + Abar^2 s^2 / 2`` (exact since ``Abar^3 = 0``)."""
    Ab = coupling_matrix(n_landmarks)
    return np.eye(Ab.shape[0]) + s * Ab + 0.5 * s * s * (Ab @ Ab)


def gramian_factored(
    t: ArrayLike,
    R: ArrayLike,
    zprime: ArrayLike,
    delta: float = 2.0,
    window_step: float = 0.1,
) -> GramianReport:
    """
    The same Gramian from the rotation/nilpotent factorization of ``Phi``.

    With ``Phi(tau, s) = T(tau) exp(Abar (tau - s)) T(s)^T``,

        W_o = T(s) [(1/delta) int E(u)^T Hbar(tau) E(u) dtau] T(s)^T,   u = tau - s

    where ``Hbar = blkdiag(pi(z'_1), ..., pi(z'_N), 0, 0)`` uses inertial
    bearings. Because ``E(u)`` is quadratic in ``u`` the integral reduces to
    the moments ``int u^k Hbar dtau`` for ``k = 0..4``.
    """
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    Pz = proj(np.asarray(zprime, dtype=float))
    dt = _uniform_step(t)
    starts, m, _ = _window_starts(t, dt, delta, window_step)
    N = Pz.shape[1]
    n = state_dim(N)
    Ab = coupling_matrix(N)
    powers = [np.eye(n), Ab, Ab @ Ab]
    fact = [1.0, 1.0, 0.5]
    u = np.arange(m + 1) * dt
    wts = np.full(m + 1, dt)
    wts[[0, -1]] *= 0.5
    U = wts[None, :] * u[None, :] ** np.arange(5)[:, None]  # (5, m+1)
    idx = np.arange(N)
    mats = np.empty((starts.size, n, n))
    for w, k0 in enumerate(starts):
        blocks = np.einsum("kj,jnab->knab", U, Pz[k0 : k0 + m + 1])  # (5, N, 3, 3)
        Hm = np.zeros((5, N + 2, 3, N + 2, 3))
        Hm[:, idx, :, idx, :] = blocks.transpose(1, 0, 2, 3)
        Hm = Hm.reshape(5, n, n)
        Wbar = np.zeros((n, n))
        for a in range(3):
            for b in range(3):
                Wbar += fact[a] * fact[b] * (powers[a].T @ Hm[a + b] @ powers[b])
        Rs = R[k0]
        W = np.einsum("ia,AaBb,jb->AiBj", Rs.T, Wbar.reshape(N + 2, 3, N + 2, 3), Rs.T).reshape(n, n)
        mats[w] = 0.5 * (W + W.T) / delta
    return GramianReport("factored", float(delta), t[starts], np.linalg.eigvalsh(mats)[:, 0], mats)


def gramian_disagreement(a: GramianReport, b: GramianReport) -> Array:
    """Relative Frobenius difference per window."""
    if a.matrices.shape != b.matrices.shape:
        raise ValueError("reports cover different windows")
    diff = np.linalg.norm(a.matrices - b.matrices, axis=(1, 2))
    return diff / np.linalg.norm(b.matrices, axis=(1, 2))


# --------------------------------------------------------------------------
# exponential envelopes


@dataclass(frozen=True)
class ExponentialFit:
    """
    Log-linear fit ``y(t) ~ exp(c - rate t)`` shifted up to an envelope.

    ``alpha`` is the envelope prefactor, ``alpha * exp(-rate t) >= y(t)`` on
    the window. ``gain`` expresses it relative to ``y(0)``, matching the form
    ``||x(t)|| <= gain exp(-rate t) ||x(0)||``.
    """

    rate: float
    alpha: float
    gain: float
    residual: float
    window: tuple[float, float]
    dominates: bool


def fit_exponential(t: ArrayLike, values: ArrayLike, t_start: float | None = None, t_end: float | None = None) -> ExponentialFit:
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and values must be matching 1-D arrays")
    lo = t[0] if t_start is None else t_start
    hi = t[-1] if t_end is None else t_end
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than two samples")
    ts, ys = t[sel], y[sel]
    if not np.all(np.isfinite(ys)) or np.any(ys <= 0.0):
        raise NonPositiveTrace("trace must be strictly positive on the fit window")
    logy = np.log(ys)
    slope, intercept = np.polyfit(ts, logy, 1)
    resid = logy - (intercept + slope * ts)
    alpha = float(np.exp(intercept + resid.max()))
    rate = float(-slope)
    envelope = alpha * np.exp(-rate * ts)
    y0 = y[0]
    return ExponentialFit(
        rate=rate,
        alpha=alpha,
        gain=alpha / y0 if y0 > 0.0 else float("nan"),
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(ts[0]), float(ts[-1])),
        dominates=bool(np.all(envelope >= ys * (1.0 - 1e-12))),
    )


# --------------------------------------------------------------------------
# pose error system


def gamma1(anchors: AnchorSet, gains: PoseGains, Rhat: ArrayLike, n_landmarks: int) -> Array:
    """``(k_R/2) [rho_i skew(nu_i) Rhat ..., 0]``, shape ``(..., 3, 3N+6)``."""
    Rhat = np.asarray(Rhat, dtype=float)
    M = anchors.count
    blocks = 0.5 * gains.k_R * anchors.weights[:, None, None] * skew(anchors.nu)  # (M, 3, 3)
    left = np.einsum("mab,...bc->...amc", blocks, Rhat).reshape(Rhat.shape[:-2] + (3, 3 * M))
    out = np.zeros(Rhat.shape[:-2] + (3, state_dim(n_landmarks)))
    out[..., : 3 * M] = left
    return out


def gamma2(anchors: AnchorSet, gains: PoseGains, R: ArrayLike, n_landmarks: int) -> Array:
    """``[k_p rho_i R ..., 0, R, 0]``, shape ``(..., 3, 3N+6)``."""
    R = np.asarray(R, dtype=float)
    M = anchors.count
    N = n_landmarks
    out = np.zeros(R.shape[:-2] + (3, state_dim(N)))
    scaled = gains.k_p * anchors.weights[:, None, None] * R[..., None, :, :]  # (..., M, 3, 3)
    out[..., : 3 * M] = np.moveaxis(scaled, -3, -2).reshape(R.shape[:-2] + (3, 3 * M))
    out[..., 3 * N : 3 * N + 3] = R
    return out


def gamma_norms(anchors: AnchorSet, gains: PoseGains) -> tuple[float, float]:
    """Closed-form ``(||Gamma_1||_F, ||Gamma_2||_F)``; both are independent of the rotations."""
    rho = anchors.weights
    k1 = 0.5 * gains.k_R * np.sqrt(np.sum(2.0 * rho**2 * np.sum(anchors.nu**2, axis=1)))
    k2 = np.sqrt(3.0 * (gains.k_p**2 * np.sum(rho**2) + 1.0))
    return float(k1), float(k2)


@dataclass(frozen=True)
class UltimateBound:
    """Constants of ``dW/dt <= -alpha W + 2 k_R lam_m + delta_u``."""

    alpha: float
    lambda_m: float
    k_gamma1: float
    k_gamma2: float
    delta_u: float
    bound: float  # limsup of W implied by the inequality


def ultimate_bound(anchors: AnchorSet, gains: PoseGains, xtilde_sup: float) -> UltimateBound:
    lam = float(np.linalg.eigvalsh(anchors.Mbar)[0])
    k1, k2 = gamma_norms(anchors, gains)
    alpha = min(gains.k_R * lam, gains.k_p)
    du = (k1**2 / (4.0 * gains.k_R * lam) + k2**2 / gains.k_p) * xtilde_sup**2
    return UltimateBound(alpha, lam, k1, k2, du, (2.0 * gains.k_R * lam + du) / alpha)


def undesired_equilibria(anchors: AnchorSet) -> Array:
    """``exp(pi v)`` for the three unit eigenvectors ``v`` of ``M``, shape (3, 3, 3)."""
    _, vecs = np.linalg.eigh(anchors.Mmat)
    return exp_so3(np.pi * vecs.T)


@dataclass(frozen=True)
class IssReport:
    t: Array  # (K,)
    W: Array  # (K, B) |Rtilde|_I^2 + ||ptilde||^2
    lyapunov: Array  # (K, B) trace(M (I - Rtilde)) + ||ptilde||^2 / 2
    psi_norm: Array  # (K, B) ||psi(M Rtilde)||
    Rtilde: Array  # (B, 3, 3) terminal
    ptilde: Array  # (B, 3) terminal

    @property
    def terminal_W(self) -> Array:
        return self.W[-1]


def _error_flow(Mm, gains, drive, Rt, pt, horizon, dt, stride):
    """
    RK4 on ``dR/dt = R skew(-k_R psi(M R) + u1)``, ``dp/dt = -k_p p + u2``
    where ``drive(t, R) -> (u1, u2)``. Batched over the leading axis.
    """
    if not dt > 0.0 or horizon < 0.0:
        raise ValueError("dt must be positive and the horizon non-negative")

    def rhs(tk, R, p):
        u1, u2 = drive(tk, R)
        return R @ skew(-gains.k_R * psi(Mm @ R) + u1), -gains.k_p * p + u2

    n_steps = _steps(horizon, dt, "horizon") if horizon > 0 else 0
    rows = list(range(0, n_steps + 1, max(1, stride)))
    if rows[-1] != n_steps:
        rows.append(n_steps)
    ts, Ws, Vs, Ps = [], [], [], []

    def record(k):
        W = np.asarray(attitude_distance(Rt)) ** 2 + np.sum(pt**2, axis=-1)
        ts.append(k * dt)
        Ws.append(W)
        Vs.append(np.einsum("ij,bji->b", Mm, np.eye(3) - Rt) + 0.5 * np.sum(pt**2, axis=-1))
        Ps.append(np.linalg.norm(psi(Mm @ Rt), axis=-1))

    record(0)
    nxt = 1
    h = 0.5 * dt
    c = dt / 6.0
    for k in range(n_steps):
        tk = k * dt
        dR1, dp1 = rhs(tk, Rt, pt)
        dR2, dp2 = rhs(tk + h, Rt + h * dR1, pt + h * dp1)
        dR3, dp3 = rhs(tk + h, Rt + h * dR2, pt + h * dp2)
        dR4, dp4 = rhs(tk + dt, Rt + dt * dR3, pt + dt * dp3)
        Rt = orthonormalize(Rt + c * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4))
        pt = pt + c * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
        if nxt < len(rows) and rows[nxt] == k + 1:
            record(k + 1)
            nxt += 1
    return IssReport(np.array(ts), np.array(Ws), np.array(Vs), np.array(Ps), Rt, pt)


def iss_experiment(
    anchors: AnchorSet,
    gains: PoseGains,
    xtilde: Callable[[float], Array],
    initial_errors: Sequence[tuple[ArrayLike, ArrayLike]],
    n_landmarks: int,
    horizon: float = 10.0,
    dt: float = 1e-3,
    attitude: Callable[[float], Array] | None = None,
    stride: int = 10,
) -> IssReport:
    """
    Integrate the pose error system driven by a prescribed ``xtilde(t)``:

        dRtilde/dt = Rtilde skew(-k_R psi(M Rtilde) + Gamma_1 xtilde)
        dptilde/dt = -k_p ptilde + Gamma_2 xtilde

    ``Gamma_1`` depends on ``Rhat = Rtilde^T R`` and ``Gamma_2`` on ``R``, the
    true attitude given by ``attitude(t)`` (identity when omitted). All
    initial errors are integrated together by RK4.
    """
    R_fn = attitude if attitude is not None else (lambda _t: np.eye(3))
    Rt = np.array([np.asarray(r, dtype=float) for r, _ in initial_errors])
    pt = np.array([np.asarray(p, dtype=float) for _, p in initial_errors])
    N = n_landmarks

    def drive(tk, Rt):
        R = R_fn(tk)
        x = np.asarray(xtilde(tk), dtype=float)
        Rhat = np.swapaxes(Rt, -1, -2) @ R
        return gamma1(anchors, gains, Rhat, N) @ x, gamma2(anchors, gains, R, N) @ x

    return _error_flow(anchors.Mmat, gains, drive, Rt, pt, horizon, dt, stride)


def principal_frame(anchors: AnchorSet) -> tuple[Array, Array]:
    """Eigenvalues of ``M`` and a proper rotation ``Q`` with ``M = Q diag(lam) Q^T``."""
    lam, Q = np.linalg.eigh(anchors.Mmat)
    if np.linalg.det(Q) < 0.0:
        Q[:, 2] = -Q[:, 2]
    return lam, Q


def equilibrium_witness(
    anchors: AnchorSet,
    gains: PoseGains,
    perturbation: float = 1e-3,
    horizon: float = 10.0,
    dt: float = 1e-3,
    seed: int = 0,
    stride: int = 10,
) -> tuple[IssReport, IssReport]:
    """
    Zero-input runs from the three undesired equilibria, exact and perturbed.

    The flow is conjugation-equivariant, so it is integrated in the principal
    axes of ``M``, where the equilibria ``exp(pi e_k) = diag(+-1)`` are exact
    in floating point. (In other frames the rounding of ``exp(pi v)``
    already seeds the unstable manifold.) The perturbed starts are
    ``exp(perturbation * w) R*`` with random unit ``w``. Both reports use
    principal-axis coordinates; ``W``, the Lyapunov value and
    ``||psi(M R)||`` are frame independent.
    """
    lam, _ = principal_frame(anchors)
    Md = np.diag(lam)
    eq = np.array([2.0 * np.outer(e, e) - np.eye(3) for e in np.eye(3)])
    rng = np.random.default_rng(seed)
    w = unit(rng.normal(size=(3, 3)))
    kicked = exp_so3(perturbation * w) @ eq
    zero = np.zeros((3, 3))

    def drive(_t, _R):
        return zero, zero

    exact = _error_flow(Md, gains, drive, eq, np.zeros((3, 3)), horizon, dt, stride)
    perturbed = _error_flow(Md, gains, drive, kicked, np.zeros((3, 3)), horizon, dt, stride)
    return exact, perturbed
