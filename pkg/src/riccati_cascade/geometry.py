"""
SO(3) and projector primitives.

All functions accept stacked inputs: a leading batch shape is carried through,
so ``skew`` of a ``(K, 3)`` array returns a ``(K, 3, 3)`` array, and so on.
Rotations are plain ``ndarray`` objects; there is no wrapper class.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

Array = NDArray[np.float64]

# below this angle the Rodrigues coefficients switch to their Taylor series
SMALL_ANGLE = 1e-6


def skew(v: ArrayLike) -> Array:
    """
    Cross-product matrix of ``v``.

    Parameters
    ----------
    v : array_like, shape (..., 3)

    Returns
    -------
    ndarray, shape (..., 3, 3)
        Matrix ``S`` with ``S @ w == np.cross(v, w)``.
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape + (3,))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def cross(a: ArrayLike, b: ArrayLike) -> Array:
    """Cross product along the last axis (cheaper than ``np.cross`` for small stacks)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def psi(A: ArrayLike) -> Array:
    """
    Half the axial vector of the antisymmetric part of ``A``.

    ``psi(A) = 0.5 * [a32 - a23, a13 - a31, a21 - a12]``, so that
    ``trace(A.T @ skew(u)) == 2 * u @ psi(A)`` and ``psi(skew(u)) == u``.
    """
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack(
        [
            A[..., 2, 1] - A[..., 1, 2],
            A[..., 0, 2] - A[..., 2, 0],
            A[..., 1, 0] - A[..., 0, 1],
        ],
        axis=-1,
    )


def proj(x: ArrayLike) -> Array:
    """Orthogonal projector ``I - x x^T`` onto the plane normal to unit ``x``."""
    x = np.asarray(x, dtype=float)
    return np.eye(3) - x[..., :, None] * x[..., None, :]


def exp_so3(u: ArrayLike) -> Array:
    """
    Rotation matrix ``exp(skew(u))`` by the Rodrigues formula.

    Below ``SMALL_ANGLE`` the coefficients ``sin(t)/t`` and
    ``(1 - cos(t))/t**2`` are replaced by their second-order expansions.
    """
    u = np.asarray(u, dtype=float)
    theta = np.linalg.norm(u, axis=-1)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    th2 = theta * theta
    a = np.where(small, 1.0 - th2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    S = skew(u)
    return np.eye(3) + a[..., None, None] * S + b[..., None, None] * (S @ S)


def log_so3(R: ArrayLike) -> Array:
    """Rotation vector of ``R`` (angle in ``[0, pi]``); inverse of ``exp_so3``."""
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    w = psi(R)
    sin_t = np.sin(theta)
    out = np.empty(w.shape)
    regular = sin_t > 1e-6
    scale = np.where(regular, theta / np.where(regular, sin_t, 1.0), 1.0)
    out[...] = scale[..., None] * w
    # near pi the antisymmetric part vanishes; recover the axis from R + I
    near_pi = (~regular) & (theta > 1.0)
    if np.any(near_pi):
        Rb = np.broadcast_to(R, w.shape + (3,))[near_pi]
        B = 0.5 * (Rb + np.eye(3))
        axes = []
        for Bk, wk in zip(B, w[near_pi]):
            col = np.argmax(np.diag(Bk))
            ax = Bk[:, col] / np.sqrt(max(Bk[col, col], 1e-300))
            if ax @ wk < 0.0:
                ax = -ax
            axes.append(ax)
        out[near_pi] = np.asarray(axes) * theta[near_pi][..., None]
    return out


def attitude_distance(R: ArrayLike) -> Array | float:
    """Normalized attitude error ``trace(I - R) / 4``, in ``[0, 1]``."""
    R = np.asarray(R, dtype=float)
    d = 0.25 * (3.0 - np.trace(R, axis1=-2, axis2=-1))
    return float(d) if np.ndim(d) == 0 else d


def orthonormalize(R: ArrayLike) -> Array:
    """
    Closest rotation to ``R`` in Frobenius norm.

    Near-orthonormal input (the usual case after an integration step) takes
    two Newton iterations of the polar decomposition; anything farther off
    goes through an SVD.
    """
    R = np.asarray(R, dtype=float)
    Rt = np.swapaxes(R, -1, -2)
    if np.abs(Rt @ R - np.eye(3)).max() < 1e-4:
        for _ in range(2):
            R = 1.5 * R - 0.5 * R @ (np.swapaxes(R, -1, -2) @ R)
        return R
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    flip = np.linalg.det(Q) < 0.0
    if np.any(flip):
        U = U.copy()
        U[..., :, 2] = np.where(flip[..., None], -U[..., :, 2], U[..., :, 2])
        Q = U @ Vt
    return Q


def is_rotation(R: ArrayLike, tol: float = 1e-9) -> bool:
    """True when ``R^T R = I`` and ``det R = +1`` within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    return bool(ortho < tol and np.all(np.abs(np.linalg.det(R) - 1.0) < tol))


def unit(v: ArrayLike) -> Array:
    """Normalize along the last axis."""
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
