"""
Monocular camera model: landmark projection, pixels, bearings, and the
projector-based outputs consumed by the Riccati observer.

Frames: inertial ``I``, body ``B``, camera ``C``. A landmark ``p_i`` (inertial)
is ``R^T (p_i - p)`` in the body frame and ``R_c^T (bp - p_c)`` in the camera
frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import solve_triangular

from .geometry import Array, is_rotation, proj

DEPTH_FLOOR = 1e-6


class DegenerateDepth(ValueError):
    """Landmark coincides with the camera center."""


class BehindCamera(ValueError):
    """Point has non-positive depth along the optical axis."""


class SingularIntrinsics(ValueError):
    """Intrinsic matrix cannot be inverted."""


@dataclass(frozen=True)
class CameraRig:
    """Camera pose in the body frame and pinhole intrinsics."""

    R_c: Array = field(default_factory=lambda: np.eye(3))
    p_c: Array = field(default_factory=lambda: np.zeros(3))
    K: Array = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "R_c", np.asarray(self.R_c, dtype=float))
        object.__setattr__(self, "p_c", np.asarray(self.p_c, dtype=float))
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        if not is_rotation(self.R_c):
            raise ValueError("R_c is not a rotation matrix")
        if self.p_c.shape != (3,):
            raise ValueError("p_c must be a 3-vector")
        K = self.K
        if K.shape != (3, 3) or np.any(np.tril(K, -1) != 0.0):
            raise ValueError("K must be a 3x3 upper-triangular matrix")
        if np.any(np.diag(K) <= 0.0):
            raise SingularIntrinsics("K needs a positive diagonal")


@dataclass(frozen=True)
class LandmarkMap:
    """Inertial landmark positions; the first ``known_count`` are anchors."""

    positions: Array
    known_count: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        n = pos.shape[0]
        if n < 3:
            raise ValueError(f"need at least 3 landmarks, got {n}")
        if not 3 <= self.known_count <= n:
            raise ValueError(f"known_count must lie in [3, {n}], got {self.known_count}")
        known = pos[: self.known_count]
        centered = known - known.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, np.abs(known).max())) < 2:
            raise ValueError("known landmarks are aligned")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def known(self) -> Array:
        return self.positions[: self.known_count]


def default_landmark_grid(spacing_extent: float = 4.0, per_side: int = 4, known_count: int = 4) -> LandmarkMap:
    """
    Square grid on the ground plane ``z = 0`` spanning ``[-e, e]^2``.

    The four corners come first (so they serve as the known anchors), the
    remaining points follow in row-major order.
    """
    ticks = np.linspace(-spacing_extent, spacing_extent, per_side)
    grid = [(x, y) for y in ticks for x in ticks]
    lo, hi = ticks[0], ticks[-1]
    corners = [(lo, lo), (hi, lo), (hi, hi), (lo, hi)]
    rest = [q for q in grid if q not in corners]
    pts = np.array([(x, y, 0.0) for x, y in corners + rest])
    return LandmarkMap(pts, known_count)


def load_landmarks(path) -> LandmarkMap:
    """
    Read a landmark table: one ``x y z known_flag`` row per landmark.

    Blank lines and ``#`` comments are ignored. Known landmarks must precede
    unknown ones.
    """
    rows, flags = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'x y z known_flag', got {raw!r}")
        try:
            x, y, z = (float(s) for s in parts[:3])
            flag = int(parts[3])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if flag not in (0, 1):
            raise ValueError(f"{path}:{lineno}: known_flag must be 0 or 1")
        rows.append((x, y, z))
        flags.append(flag)
    flags = np.array(flags, dtype=int)
    m = int(flags.sum())
    if np.any(flags[:m] != 1):
        raise ValueError(f"{path}: known landmarks must be listed first")
    return LandmarkMap(np.array(rows), m)


def save_landmarks(path, landmarks: LandmarkMap) -> None:
    lines = ["# x y z known_flag"]
    for i, q in enumerate(landmarks.positions):
        flag = 1 if i < landmarks.known_count else 0
        lines.append(" ".join(repr(float(c)) for c in q) + f" {flag}")
    Path(path).write_text("\n".join(lines) + "\n")


def body_landmark(R: ArrayLike, p: ArrayLike, p_i: ArrayLike) -> Array:
    """Body-frame landmark ``R^T (p_i - p)``; ``p_i`` may be stacked as ``(N, 3)``."""
    R = np.asarray(R, dtype=float)
    return (np.asarray(p_i, dtype=float) - np.asarray(p, dtype=float)) @ R


def camera_landmark(rig: CameraRig, bp: ArrayLike) -> Array:
    """Camera-frame landmark ``R_c^T (bp - p_c)``."""
    return (np.asarray(bp, dtype=float) - rig.p_c) @ rig.R_c


def bearing(rig: CameraRig, bp: ArrayLike, depth_floor: float = DEPTH_FLOOR) -> Array:
    """Unit bearing in the camera frame toward body-frame landmark(s) ``bp``."""
    rel = np.asarray(bp, dtype=float) - rig.p_c
    dist = np.linalg.norm(rel, axis=-1, keepdims=True)
    if np.any(dist <= depth_floor):
        raise DegenerateDepth("landmark coincides with the camera center")
    return (rel @ rig.R_c) / dist


def pixel_from_point(rig: CameraRig, cp: ArrayLike, depth_floor: float = DEPTH_FLOOR) -> Array:
    """Pinhole projection ``(u, v)`` of camera-frame point(s) ``cp``."""
    cp = np.asarray(cp, dtype=float)
    depth = cp[..., 2:3]
    if np.any(depth <= depth_floor):
        raise BehindCamera("point is not in front of the camera")
    uvw = (cp / depth) @ rig.K.T
    return uvw[..., :2]


def bearing_from_pixel(rig: CameraRig, u, v) -> Array:
    """Unit bearing ``K^{-1} [u, v, 1]^T / ||.||``."""
    if abs(np.linalg.det(rig.K)) < 1e-300:
        raise SingularIntrinsics("K is singular")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    pix = np.stack([u, v, np.ones_like(u)], axis=-1)
    ray = solve_triangular(rig.K, pix.reshape(-1, 3).T, lower=False).T.reshape(pix.shape)
    return ray / np.linalg.norm(ray, axis=-1, keepdims=True)


def modified_output(rig: CameraRig, z: ArrayLike) -> tuple[Array, Array]:
    """
    Projector and linear output built from bearing(s) ``z``.

    Returns ``Pi = proj(R_c z)`` and ``y = Pi p_c``. For the landmark that
    produced ``z`` one has ``Pi @ bp == y``.
    """
    Pi = proj(np.asarray(z, dtype=float) @ rig.R_c.T)
    return Pi, Pi @ rig.p_c


@dataclass(frozen=True)
class BearingSample:
    """All bearings at one instant plus the derived projectors and outputs."""

    t: float
    bearings: Array  # (N, 3)
    Pi: Array  # (N, 3, 3)
    y: Array  # (N, 3)
    visible: Array  # (N,) bool

    @property
    def count(self) -> int:
        return self.bearings.shape[0]


def measure(rig: CameraRig, t: float, bp: ArrayLike, fov_half_angle: float | None = None) -> BearingSample:
    """
    Bearings and modified outputs for body-frame landmarks ``bp``.

    With ``fov_half_angle`` set (radians), landmarks outside the cone about
    the optical axis are dropped by zeroing their projector and output.
    """
    z = bearing(rig, bp)
    Pi, y = modified_output(rig, z)
    visible = np.ones(len(z), dtype=bool)
    if fov_half_angle is not None:
        visible = z[:, 2] >= np.cos(fov_half_angle)
        Pi = np.where(visible[:, None, None], Pi, 0.0)
        y = np.where(visible[:, None], y, 0.0)
    return BearingSample(float(t), z, Pi, y, visible)
