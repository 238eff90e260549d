"""
Scenario configuration read from INI-style files.

Every key has a default mirroring the reference scenario, so an empty file
(or no file) describes it. Angles are written in units of pi.

    [trajectory]
    kind = figure_eight          ; or: line
    [landmarks]
    file =                       ; "x y z known_flag" table; grid when empty
    [observer]
    k_R = 40
    [initial]
    attitude_angle = 0.9         ; Rhat(0) = exp(0.9 pi u)
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import TrajectorySpec, figure_eight_trajectory, straight_line_trajectory
from .geometry import Array, exp_so3
from .ltv_observer import RiccatiConfig, state_dim
from .pose_observer import AnchorSet, PoseGains, build_anchors
from .sensors import CameraRig, LandmarkMap, default_landmark_grid, load_landmarks


class ConfigError(ValueError):
    """Invalid configuration; ``location`` names the offending key or line."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True)
class ScenarioConfig:
    # trajectory
    trajectory: str = "figure_eight"
    line_landmark: int = 4
    line_direction: tuple = (0.0, 0.0, -1.0)
    line_distance: float = 2.0
    line_speed: float = 0.5
    # landmarks
    landmark_file: str | None = None
    grid_extent: float = 4.0
    grid_per_side: int = 4
    known_count: int = 4
    # camera
    camera_axis: tuple = (0.0, 0.0, 1.0)
    camera_angle: float = 0.0  # units of pi
    camera_offset: tuple = (0.02, 0.06, 0.01)
    intrinsics: tuple = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    fov_half_angle: float | None = None  # units of pi; None disables culling
    # observers
    k_R: float = 40.0
    k_p: float = 100.0
    weights: tuple | None = None  # None: uniform
    tune_weights: bool = True
    q: float = 1e-4
    v: float = 1e6
    p0: float = 1.0
    n_check: int = 100
    # initial estimates
    attitude_axis: tuple | None = (1.0, 1.0, 1.0)  # None: random, drawn from the seed
    attitude_angle: float = 0.9  # units of pi
    position0: tuple = (0.0, 0.0, 0.0)
    xhat0: tuple | None = None  # None: zero
    # integration and output
    dt: float = 1e-3
    horizon: float = 20.0
    stride: int = 10
    # analysis
    window: float = 2.0
    window_step: float = 0.1
    mu_o: float = 1e-6
    fit_start: float = 1.0
    fit_end: float = 15.0
    # run
    seed: int = 0
    workers: int = 1
    source: str = field(default="<defaults>", compare=False)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("must be positive", "integration.dt")
        if self.horizon < 0.0:
            raise ConfigError("must be non-negative", "integration.horizon")
        if self.stride < 1:
            raise ConfigError("must be at least 1", "integration.stride")
        for name in ("k_R", "k_p", "q", "v", "p0"):
            if not getattr(self, name) > 0.0:
                raise ConfigError("must be positive", f"observer.{name}")
        if self.trajectory not in ("figure_eight", "line"):
            raise ConfigError(f"unknown kind {self.trajectory!r} (figure_eight | line)", "trajectory.kind")
        if self.known_count < 3:
            raise ConfigError("at least three known landmarks are needed", "landmarks.known")

    # -- derived objects -------------------------------------------------

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def landmarks(self) -> LandmarkMap:
        if self.landmark_file:
            try:
                return load_landmarks(self.landmark_file)
            except OSError as exc:
                raise ConfigError(str(exc), "landmarks.file") from None
        try:
            return default_landmark_grid(self.grid_extent, self.grid_per_side, self.known_count)
        except ValueError as exc:
            raise ConfigError(str(exc), "landmarks") from None

    def rig(self) -> CameraRig:
        axis = np.asarray(self.camera_axis, dtype=float)
        R_c = exp_so3(np.pi * self.camera_angle * axis / np.linalg.norm(axis))
        try:
            return CameraRig(R_c, np.asarray(self.camera_offset, dtype=float), np.asarray(self.intrinsics, dtype=float).reshape(3, 3))
        except ValueError as exc:
            raise ConfigError(str(exc), "camera") from None

    def trajectory_spec(self) -> TrajectorySpec:
        if self.trajectory == "figure_eight":
            return figure_eight_trajectory()
        # camera center travels along a ray through one landmark: p_c + p = p_i - (d0 + s t) d
        lm = self.landmarks()
        if not 0 <= self.line_landmark < lm.count:
            raise ConfigError(f"index out of range [0, {lm.count})", "trajectory.landmark")
        d = np.asarray(self.line_direction, dtype=float)
        d = d / np.linalg.norm(d)
        start = lm.positions[self.line_landmark] - np.asarray(self.camera_offset) - self.line_distance * d
        return straight_line_trajectory(start, -self.line_speed * d)

    def riccati(self, n_landmarks: int) -> RiccatiConfig:
        return RiccatiConfig.isotropic(n_landmarks, self.q, self.v, self.p0)

    def anchors(self, landmarks: LandmarkMap) -> AnchorSet:
        w = None if self.weights is None else np.asarray(self.weights, dtype=float)
        try:
            return build_anchors(landmarks.known, w, tune=self.tune_weights)
        except ValueError as exc:
            raise ConfigError(str(exc), "observer.weights") from None

    def gains(self) -> PoseGains:
        return PoseGains(self.k_R, self.k_p)

    def attitude_unit_axis(self) -> Array:
        if self.attitude_axis is None:
            u = self.rng().normal(size=3)
        else:
            u = np.asarray(self.attitude_axis, dtype=float)
        return u / np.linalg.norm(u)

    def initial_attitude(self) -> Array:
        return exp_so3(np.pi * self.attitude_angle * self.attitude_unit_axis())

    def initial_xhat(self, n_landmarks: int) -> Array:
        n = state_dim(n_landmarks)
        if self.xhat0 is None:
            return np.zeros(n)
        x = np.asarray(self.xhat0, dtype=float)
        if x.shape != (n,):
            raise ConfigError(f"expected {n} values, got {x.size}", "initial.xhat")
        return x

    def with_value(self, name: str, value) -> "ScenarioConfig":
        return replace(self, **{name: value})


# --------------------------------------------------------------------------
# parsing


def _floats(n: int | None = None):
    def parse(text: str):
        vals = tuple(float(x) for x in text.replace(",", " ").split())
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} numbers, got {len(vals)}")
        if not all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        return vals

    return parse


def _optional(parse):
    def inner(text: str):
        return None if text.strip().lower() in ("", "none", "auto", "uniform", "zero", "random", "off") else parse(text)

    return inner


def _finite(text: str) -> float:
    x = float(text)
    if not np.isfinite(x):
        raise ValueError("value must be finite")
    return x


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# (section, key) -> (field, parser)
_KEYS = {
    ("trajectory", "kind"): ("trajectory", str.strip),
    ("trajectory", "landmark"): ("line_landmark", int),
    ("trajectory", "direction"): ("line_direction", _floats(3)),
    ("trajectory", "distance"): ("line_distance", _finite),
    ("trajectory", "speed"): ("line_speed", _finite),
    ("landmarks", "file"): ("landmark_file", _optional(str.strip)),
    ("landmarks", "extent"): ("grid_extent", _finite),
    ("landmarks", "per_side"): ("grid_per_side", int),
    ("landmarks", "known"): ("known_count", int),
    ("camera", "axis"): ("camera_axis", _floats(3)),
    ("camera", "angle"): ("camera_angle", _finite),
    ("camera", "offset"): ("camera_offset", _floats(3)),
    ("camera", "intrinsics"): ("intrinsics", _floats(9)),
    ("camera", "fov_half_angle"): ("fov_half_angle", _optional(_finite)),
    ("observer", "k_r"): ("k_R", _finite),
    ("observer", "k_p"): ("k_p", _finite),
    ("observer", "weights"): ("weights", _optional(_floats())),
    ("observer", "tune_weights"): ("tune_weights", _bool),
    ("observer", "q"): ("q", _finite),
    ("observer", "v"): ("v", _finite),
    ("observer", "p0"): ("p0", _finite),
    ("observer", "n_check"): ("n_check", int),
    ("initial", "attitude_axis"): ("attitude_axis", _optional(_floats(3))),
    ("initial", "attitude_angle"): ("attitude_angle", _finite),
    ("initial", "position"): ("position0", _floats(3)),
    ("initial", "xhat"): ("xhat0", _optional(_floats())),
    ("integration", "dt"): ("dt", _finite),
    ("integration", "horizon"): ("horizon", _finite),
    ("integration", "stride"): ("stride", int),
    ("analysis", "window"): ("window", _finite),
    ("analysis", "window_step"): ("window_step", _finite),
    ("analysis", "mu_o"): ("mu_o", _finite),
    ("analysis", "fit_start"): ("fit_start", _finite),
    ("analysis", "fit_end"): ("fit_end", _finite),
    ("run", "seed"): ("seed", int),
    ("run", "workers"): ("workers", int),
}

# CLI/sweep names for individual fields
FIELD_ALIASES = {f"{sec}.{key}": name for (sec, key), (name, _) in _KEYS.items()}


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to the 1-based line where it is set."""
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
        elif section and line and line[0] not in "#;" and "=" in line:
            lines[(section, line.split("=", 1)[0].strip().lower())] = i
    return lines


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse INI text into a validated ``ScenarioConfig``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), source) from None
    where = _key_lines(text)
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            loc = f"{source}:{where.get((section, key), '?')}: [{section}] {key}"
            spec = _KEYS.get((section.lower(), key.lower()))
            if spec is None:
                raise ConfigError("unknown key", loc)
            name, parse = spec
            try:
                values[name] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value {raw!r} ({exc})", loc) from None
    try:
        return ScenarioConfig(**values, source=source)
    except ConfigError as exc:
        sec, _, key = exc.location.partition(".")
        line = where.get((sec, key.lower()))
        loc = f"{source}:{line}: [{sec}] {key}" if line else f"{source}: [{sec}] {key}"
        raise ConfigError(str(exc).split(": ", 1)[-1], loc) from None


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(exc.strerror or str(exc), str(path)) from None
    cfg = parse_config(text, str(path))
    if cfg.landmark_file and not Path(cfg.landmark_file).is_absolute():
        cfg = replace(cfg, landmark_file=str(path.parent / cfg.landmark_file))
    return cfg


def render_config(cfg: ScenarioConfig) -> str:
    """INI text that parses back to ``cfg``."""

    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return " ".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(float(v))
        return str(v)

    sections: dict = {}
    for (sec, key), (name, _) in _KEYS.items():
        sections.setdefault(sec, []).append(f"{key} = {fmt(getattr(cfg, name))}")
    return "\n".join(f"[{sec}]\n" + "\n".join(lines) + "\n" for sec, lines in sections.items())
