"""
Nonlinear pose observer on SO(3) x R^3.

It consumes the gyro, the velocity estimate and the body-frame estimates of
the first ``M`` landmarks (whose inertial positions are known):

    dRhat/dt = Rhat skew(omega + k_R Rhat^T sigma_R)
    dphat/dt = Rhat vhat + (k_R sigma_R) x (phat - p_o) + k_p sigma_p

with innovations built from ``xi_i = p_i - phat - Rhat bphat_i``.

Pose arrays may carry a leading batch axis, so several initial conditions
can be propagated against one shared set of Riccati-observer estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from .geometry import Array, attitude_distance, cross, orthonormalize, psi, skew


class DegenerateAnchors(ValueError):
    """Known landmarks are aligned (fewer than three non-collinear points)."""


class RepeatedEigenvalues(ValueError):
    """Weight tuning could not separate the eigenvalues of ``Mbar``."""


@dataclass(frozen=True, eq=False)
class AnchorSet:
    anchors: Array  # (M, 3)
    weights: Array  # (M,)
    p_o: Array
    nu: Array  # (M, 3)
    Mmat: Array
    Mbar: Array

    @property
    def count(self) -> int:
        return self.anchors.shape[0]

    @cached_property
    def nu_skew_weighted(self) -> Array:
        """``0.5 [rho_1 skew(nu_1), ..., rho_M skew(nu_M)]``, shape (3, 3M)."""
        S = 0.5 * self.weights[:, None, None] * skew(self.nu)
        return np.ascontiguousarray(S.transpose(1, 0, 2).reshape(3, -1))


@dataclass(frozen=True)
class PoseGains:
    """
    Observer gains. Either scalars, or 1-D arrays giving one gain per member
    of a batched pose estimate.
    """

    k_R: float | Array = 40.0
    k_p: float | Array = 100.0

    def __post_init__(self):
        for name in ("k_R", "k_p"):
            k = getattr(self, name)
            if np.ndim(k) > 1 or not np.all(np.isfinite(k)) or not np.all(np.asarray(k) > 0.0):
                raise ValueError("pose gains must be strictly positive scalars or 1-D arrays")

    def columns(self) -> tuple:
        """Gains shaped to broadcast against ``(B, 3)`` batches."""
        return tuple(np.asarray(k, dtype=float)[:, None] if np.ndim(k) == 1 else k for k in (self.k_R, self.k_p))


@dataclass(frozen=True)
class PoseEstimate:
    Rhat: Array
    phat: Array


@dataclass(frozen=True)
class PoseError:
    Rtilde: Array
    ptilde: Array


@dataclass(frozen=True)
class PoseStage:
    """Inputs to one RK stage of the pose observer."""

    omega: Array
    vhat: Array
    bp_hat: Array  # (M, 3) known-landmark estimates in the body frame


def _anchor_matrices(pts: Array, rho: Array):
    p_o = rho @ pts
    nu = pts - p_o
    Mmat = np.einsum("m,mi,mj->ij", rho, nu, nu)
    Mbar = 0.5 * (np.trace(Mmat) * np.eye(3) - Mmat)
    return p_o, nu, Mmat, Mbar


def _spectral_gap(Mbar: Array) -> float:
    lam = np.linalg.eigvalsh(Mbar)
    return float(min(lam[0], np.diff(lam).min()))


def build_anchors(
    landmarks: ArrayLike,
    weights: ArrayLike | None = None,
    eig_gap_tol: float = 1e-6,
    max_attempts: int = 100,
    tune: bool = True,
) -> AnchorSet:
    """
    Weighted center and moment matrices of the known landmarks.

    Starting from ``weights`` (uniform by default), if ``Mbar`` is not positive
    definite with three eigenvalues separated by more than ``eig_gap_tol``,
    the first two weights are scaled by 1.05 and 0.95 and renormalized,
    repeatedly, up to ``max_attempts`` times.

    Raises
    ------
    DegenerateAnchors
        If the landmarks are aligned.
    RepeatedEigenvalues
        If no tuned weighting separates the spectrum (or ``tune`` is off and
        the given weights do not).
    """
    pts = np.asarray(landmarks, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise DegenerateAnchors("need at least three 3-D anchors")
    M = pts.shape[0]
    rho = np.full(M, 1.0 / M) if weights is None else np.asarray(weights, dtype=float).copy()
    if rho.shape != (M,) or np.any(rho <= 0.0) or np.any(rho >= 1.0):
        raise ValueError("weights must lie in (0, 1), one per anchor")
    if abs(rho.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to one")
    centered = pts - pts.mean(axis=0)
    scale = max(1.0, np.abs(pts).max())
    if np.linalg.matrix_rank(centered, tol=1e-9 * scale) < 2:
        raise DegenerateAnchors("anchors are aligned")

    for _ in range(max_attempts + 1):
        p_o, nu, Mmat, Mbar = _anchor_matrices(pts, rho)
        if _spectral_gap(Mbar) > eig_gap_tol:
            return AnchorSet(pts, rho, p_o, nu, Mmat, Mbar)
        if not tune:
            break
        rho = rho.copy()
        rho[0] *= 1.05
        rho[1] *= 0.95
        rho /= rho.sum()
    raise RepeatedEigenvalues("Mbar eigenvalues are not distinct for any tried weighting")


def innovations(anchors: AnchorSet, pose: PoseEstimate, bp_hat: ArrayLike) -> tuple[Array, Array]:
    """
    Attitude and position innovations.

    ``bp_hat`` holds the body-frame estimates of the ``M`` known landmarks,
    shape ``(M, 3)`` or batched ``(..., M, 3)`` to match ``pose``.
    """
    Rhat = np.asarray(pose.Rhat, dtype=float)
    phat = np.asarray(pose.phat, dtype=float)
    bp_hat = np.asarray(bp_hat, dtype=float)
    xi = anchors.anchors - phat[..., None, :] - bp_hat @ np.swapaxes(Rhat, -1, -2)
    M = anchors.count
    sigma_R = xi.reshape(xi.shape[:-2] + (3 * M,)) @ anchors.nu_skew_weighted.T
    sigma_p = anchors.weights @ xi
    return sigma_R, sigma_p


def innovations_from_errors(anchors: AnchorSet, Rtilde, ptilde, Rhat, bp_tilde) -> tuple[Array, Array]:
    """
    Innovations rewritten in terms of the estimation errors.

    ``bp_tilde`` is truth minus estimate for the known landmarks. Returns
    ``psi(M Rtilde) + 0.5 sum rho_i nu_i x (Rhat bp_tilde_i)`` and
    ``Rtilde^T ptilde + Rhat sum rho_i bp_tilde_i``.
    """
    rho = anchors.weights
    rotated = np.asarray(bp_tilde, dtype=float) @ np.asarray(Rhat).T
    sigma_R = psi(anchors.Mmat @ Rtilde) + 0.5 * np.einsum("m,mi->i", rho, cross(anchors.nu, rotated))
    sigma_p = np.asarray(Rtilde).T @ ptilde + rho @ rotated
    return sigma_R, sigma_p


def _pose_rhs(Rhat, phat, stage: PoseStage, gains: PoseGains, anchors: AnchorSet):
    sigma_R, sigma_p = innovations(anchors, PoseEstimate(Rhat, phat), stage.bp_hat)
    k_R, k_p = gains.columns()
    corr = k_R * sigma_R
    # Rhat skew(Rhat^T c) = skew(c) Rhat
    dR = Rhat @ skew(stage.omega) + skew(corr) @ Rhat
    dp = Rhat @ stage.vhat + cross(corr, phat - anchors.p_o) + k_p * sigma_p
    return dR, dp


def pose_step(pose: PoseEstimate, stages, gains: PoseGains, anchors: AnchorSet, dt: float) -> PoseEstimate:
    """
    One RK4 step of the pose observer.

    ``stages`` is a single ``PoseStage`` held over the step, or four stage
    inputs matching the RK4 stages of the upstream observer. Innovations are
    re-evaluated at every stage.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    st = [stages] * 4 if isinstance(stages, PoseStage) else list(stages)
    if len(st) != 4:
        raise ValueError("pose_step needs one stage input or four")
    R, p = np.asarray(pose.Rhat, dtype=float), np.asarray(pose.phat, dtype=float)
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(p))):
        raise ValueError("non-finite pose estimate")
    h = 0.5 * dt
    dR1, dp1 = _pose_rhs(R, p, st[0], gains, anchors)
    dR2, dp2 = _pose_rhs(R + h * dR1, p + h * dp1, st[1], gains, anchors)
    dR3, dp3 = _pose_rhs(R + h * dR2, p + h * dp2, st[2], gains, anchors)
    dR4, dp4 = _pose_rhs(R + dt * dR3, p + dt * dp3, st[3], gains, anchors)
    c = dt / 6.0
    R_new = orthonormalize(R + c * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4))
    p_new = p + c * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
    return PoseEstimate(R_new, p_new)


def pose_error(R: ArrayLike, p: ArrayLike, pose: PoseEstimate, anchors: AnchorSet) -> PoseError:
    """``Rtilde = R Rhat^T`` and ``ptilde = p - Rtilde phat - (I - Rtilde) p_o``."""
    R = np.asarray(R, dtype=float)
    Rt = R @ np.swapaxes(np.asarray(pose.Rhat, dtype=float), -1, -2)
    po = anchors.p_o
    pt = (
        np.asarray(p, dtype=float)
        - np.einsum("...ab,...b->...a", Rt, pose.phat)
        - po
        + np.einsum("...ab,b->...a", Rt, po)
    )
    return PoseError(Rt, pt)


def reconstruct_landmarks(pose: PoseEstimate, bp_hat: ArrayLike) -> Array:
    """Inertial landmark estimates ``Rhat bphat_i + phat``."""
    return np.einsum("...ab,...nb->...na", pose.Rhat, np.asarray(bp_hat, dtype=float)) + np.asarray(pose.phat)[..., None, :]


def ultimate_bound_monitor(err: PoseError) -> Array | float:
    """``|Rtilde|_I^2 + ||ptilde||^2``."""
    d = attitude_distance(err.Rtilde)
    W = np.asarray(d) ** 2 + np.sum(np.asarray(err.ptilde) ** 2, axis=-1)
    return float(W) if np.ndim(W) == 0 else W


def error_lyapunov(anchors: AnchorSet, err: PoseError) -> Array | float:
    """``trace(M (I - Rtilde)) + ||ptilde||^2 / 2`` for the unforced error system."""
    I_R = np.eye(3) - np.asarray(err.Rtilde)
    val = np.einsum("ij,...ji->...", anchors.Mmat, I_R) + 0.5 * np.sum(np.asarray(err.ptilde) ** 2, axis=-1)
    return float(val) if np.ndim(val) == 0 else val
