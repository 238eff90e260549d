"""
Scenario runs and their CSV outputs.

Column layouts are fixed:

truth.csv      t, R00..R22, p_x p_y p_z, v_x v_y v_z
ltv.csv        t, hat_bp{i}_{x,y,z} for each landmark, hat_v_*, hat_eta_*,
               xtilde_norm, P_eig_min, P_eig_max, P_asym, lyapunov
pose.csv       t, Rhat00..Rhat22, phat_*, att_err, ptilde_norm, pos_err,
               sigma_R_*, sigma_p_*, W
landmarks.csv  t, landmark, known, x, y, z, err   (one row per landmark per sample)

Numbers are written with 17 significant digits so traces can be replayed.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    bearing_directions,
    body_projectors,
    fit_exponential,
    gramian_direct,
    gramian_disagreement,
    gramian_factored,
    WindowTooShort,
    pe_check,
    principal_frame,
)
from .config import ConfigError, ScenarioConfig
from .dynamics import simulate_truth
from .geometry import exp_so3
from .pose_observer import PoseGains
from .runner import CascadeResult, run_cascade

log = logging.getLogger(__name__)

AXES = ("x", "y", "z")
FLOAT_FMT = "%.17g"

# sweepable parameter -> config field
SWEEP_PARAMS = {
    "k_R": "k_R",
    "k_p": "k_p",
    "dt": "dt",
    "attitude_angle": "attitude_angle",
    "q": "q",
    "v": "v",
}
# parameters that leave the Riccati observer untouched; one shared run serves all values
POSE_ONLY = ("k_R", "k_p", "attitude_angle")


def _matrix_cols(prefix: str) -> list[str]:
    return [f"{prefix}{i}{j}" for i in range(3) for j in range(3)]


def _vec_cols(prefix: str) -> list[str]:
    return [f"{prefix}_{a}" for a in AXES]


def truth_columns() -> list[str]:
    return ["t", *_matrix_cols("R"), *_vec_cols("p"), *_vec_cols("v")]


def ltv_columns(n_landmarks: int) -> list[str]:
    lm = [f"hat_bp{i}_{a}" for i in range(n_landmarks) for a in AXES]
    return ["t", *lm, *_vec_cols("hat_v"), *_vec_cols("hat_eta"), "xtilde_norm", "P_eig_min", "P_eig_max", "P_asym", "lyapunov"]


def pose_columns() -> list[str]:
    return [
        "t",
        *_matrix_cols("Rhat"),
        *_vec_cols("phat"),
        "att_err",
        "ptilde_norm",
        "pos_err",
        *_vec_cols("sigma_R"),
        *_vec_cols("sigma_p"),
        "W",
    ]


LANDMARK_COLUMNS = ["t", "landmark", "known", "x", "y", "z", "err"]


def write_table(path: Path, columns: list[str], rows: np.ndarray) -> None:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    with open(path, "w", newline="") as f:
        np.savetxt(f, rows, fmt=FLOAT_FMT, delimiter=",", header=",".join(columns), comments="")


def write_records(path: Path, records: list[dict]) -> None:
    """Mixed-type rows (labels and numbers) with the same float precision."""
    if not records:
        path.write_text("")
        return
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(records[0]))
        for r in records:
            w.writerow([FLOAT_FMT % v if isinstance(v, float) else v for v in r.values()])


# --------------------------------------------------------------------------
# simulate


@dataclass
class Scenario:
    """Objects derived from a config, built once per run."""

    cfg: ScenarioConfig

    def __post_init__(self):
        cfg = self.cfg
        self.landmarks = cfg.landmarks()
        self.rig = cfg.rig()
        self.spec = cfg.trajectory_spec()
        self.anchors = cfg.anchors(self.landmarks)
        self.riccati = cfg.riccati(self.landmarks.count)
        self.xhat0 = cfg.initial_xhat(self.landmarks.count)
        self.fov = None if cfg.fov_half_angle is None else np.pi * cfg.fov_half_angle

    def run(self, Rhat0=None, gains: PoseGains | None = None) -> CascadeResult:
        cfg = self.cfg
        return run_cascade(
            self.spec,
            self.landmarks,
            self.rig,
            self.riccati,
            self.anchors,
            cfg.gains() if gains is None else gains,
            cfg.horizon,
            cfg.dt,
            cfg.initial_attitude() if Rhat0 is None else Rhat0,
            phat0=np.asarray(cfg.position0, dtype=float),
            xhat0=self.xhat0,
            stride=cfg.stride,
            n_check=cfg.n_check,
            fov_half_angle=self.fov,
        )


def _trace_tables(res: CascadeResult, member: int = 0) -> dict:
    K = res.t.size
    N = res.landmarks.count
    xt = res.xtilde
    truth = np.column_stack([res.t, res.truth_R.reshape(K, 9), res.truth_p, res.truth_v])
    ltv = np.column_stack(
        [res.t, res.xhat, np.linalg.norm(xt, axis=1), res.P_eig_min, res.P_eig_max, res.P_asym, res.lyapunov]
    )
    att = res.att_err[:, member]
    ptn = res.ptilde_norm[:, member]
    pose = np.column_stack(
        [
            res.t,
            res.Rhat[:, member].reshape(K, 9),
            res.phat[:, member],
            att,
            ptn,
            res.pos_err[:, member],
            res.sigma_R[:, member],
            res.sigma_p[:, member],
            att**2 + ptn**2,
        ]
    )
    est = res.landmark_hat[:, member]  # (K, N, 3)
    err = np.linalg.norm(est - res.landmarks.positions, axis=-1)
    idx = np.arange(N)
    known = (idx < res.landmarks.known_count).astype(float)
    lm = np.column_stack(
        [
            np.repeat(res.t, N),
            np.tile(idx, K),
            np.tile(known, K),
            est.reshape(K * N, 3),
            err.reshape(K * N),
        ]
    )
    return {"truth.csv": truth, "ltv.csv": ltv, "pose.csv": pose, "landmarks.csv": lm}


def simulate(cfg: ScenarioConfig, out: str | Path) -> dict:
    """
    Run truth and both observers; write the four trace files into ``out``.

    A zero horizon writes header-only files. Returns a summary of the
    terminal errors.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sc = Scenario(cfg)
    N = sc.landmarks.count
    columns = {
        "truth.csv": truth_columns(),
        "ltv.csv": ltv_columns(N),
        "pose.csv": pose_columns(),
        "landmarks.csv": LANDMARK_COLUMNS,
    }
    if cfg.horizon == 0.0:
        for name, cols in columns.items():
            write_table(out / name, cols, np.empty((0, len(cols))))
        return {"horizon": 0.0, "files": sorted(columns)}
    res = sc.run()
    for name, table in _trace_tables(res).items():
        write_table(out / name, columns[name], table)
    return {"horizon": cfg.horizon, "files": sorted(columns), **_terminal_summary(res, cfg)[0]}


def _terminal_summary(res: CascadeResult, cfg: ScenarioConfig) -> list[dict]:
    xn = res.xtilde_norm
    rate = float("nan")
    hi = min(cfg.fit_end, res.t[-1])
    if hi > cfg.fit_start:
        try:
            rate = fit_exponential(res.t, xn, cfg.fit_start, hi).rate
        except ValueError:
            pass
    rows = []
    for b in range(res.att_err.shape[1]):
        rows.append(
            {
                "att_err": float(res.att_err[-1, b]),
                "ptilde_norm": float(res.ptilde_norm[-1, b]),
                "pos_err": float(res.pos_err[-1, b]),
                "xtilde_norm": float(xn[-1]),
                "rate": rate,
            }
        )
    return rows


# --------------------------------------------------------------------------
# observability


def check_observability(cfg: ScenarioConfig, out: str | Path) -> dict:
    """
    Excitation and Gramian reports for the configured trajectory.

    Writes ``pe.csv`` (per landmark margin) and ``gramian.csv`` (one row per
    window and method, with the cross-method difference).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sc = Scenario(cfg)
    if cfg.horizon < cfg.window:
        raise WindowTooShort(f"window {cfg.window:g} s is longer than the horizon {cfg.horizon:g} s")
    truth = simulate_truth(sc.spec, cfg.horizon, cfg.dt)
    zp = bearing_directions(truth, sc.landmarks, sc.rig)
    pe = pe_check(truth.t, zp, cfg.window, cfg.mu_o, cfg.window_step)
    direct = gramian_direct(sc.spec.omega, truth.t, body_projectors(truth, sc.landmarks, sc.rig), cfg.window, cfg.window_step)
    factored = gramian_factored(truth.t, truth.R, zp, cfg.window, cfg.window_step)
    diff = gramian_disagreement(direct, factored)
    write_records(out / "pe.csv", pe.rows())
    rows = []
    for rep in (direct, factored):
        for r, d in zip(rep.rows(), diff):
            rows.append({**r, "rel_diff": float(d)})
    write_records(out / "gramian.csv", rows)
    return {
        "pe_all_pass": pe.all_pass,
        "pe_failing": [int(i) for i in np.flatnonzero(~pe.passed)],
        "pe_min_margin": float(pe.margin.min()),
        "gramian_min_eig": float(direct.min_eig.min()),
        "gramian_max_rel_diff": float(diff.max()),
        "windows": int(direct.starts.size),
    }


# --------------------------------------------------------------------------
# sweeps


def _run_summary(cfg: ScenarioConfig) -> dict:
    return _terminal_summary(Scenario(cfg).run(), cfg)[0]


def sweep(cfg: ScenarioConfig, param: str, values, out: str | Path) -> list[dict]:
    """
    One run per value of ``param``; writes ``sweep.csv`` ordered by value.

    Pose-only parameters share a single truth and Riccati run across all
    values. Attitude-angle sweeps add one row per undesired equilibrium,
    labelled ``antipodal_<k>``: the estimate starts at ``exp(pi v_k)`` for
    the eigenvectors ``v_k`` of ``M``.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}", "sweep")
    values = sorted(float(v) for v in values)
    if not values:
        raise ConfigError("no values given", "sweep")
    field_name = SWEEP_PARAMS[param]
    for v in values:
        cfg.with_value(field_name, v)  # validates every value before any work
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    if param in POSE_ONLY:
        rows = _pose_sweep(cfg, param, values)
    else:
        configs = [cfg.with_value(field_name, v) for v in values]
        if cfg.workers > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_run_summary, configs))
        else:
            results = [_run_summary(c) for c in configs]
        rows = [{"param": param, "value": v, "label": "", **r} for v, r in zip(values, results)]
    write_records(out / "sweep.csv", rows)
    return rows


def _pose_sweep(cfg: ScenarioConfig, param: str, values: list[float]) -> list[dict]:
    sc = Scenario(cfg)
    B = len(values)
    labels = [""] * B
    if param == "attitude_angle":
        u = cfg.attitude_unit_axis()
        R0 = exp_so3(np.pi * np.asarray(values)[:, None] * u)
        _, Q = principal_frame(sc.anchors)
        antipodal = np.array([2.0 * np.outer(q, q) - np.eye(3) for q in Q.T])
        R0 = np.concatenate([R0, antipodal])
        labels += [f"antipodal_{k}" for k in range(3)]
        row_values = values + [1.0] * 3
        gains = cfg.gains()
    else:
        R0 = np.broadcast_to(cfg.initial_attitude(), (B, 3, 3))
        row_values = values
        k = np.asarray(values)
        gains = PoseGains(k, cfg.k_p) if param == "k_R" else PoseGains(cfg.k_R, k)
    res = sc.run(R0, gains)
    summaries = _terminal_summary(res, cfg)
    return [{"param": param, "value": v, "label": lab, **s} for v, lab, s in zip(row_values, labels, summaries)]
