"""Experiment runners: each turns an :class:`ExperimentConfig` into a table of rows.

Rows are plain dicts keyed by the table's column names. Missing values are
``None`` and print as empty CSV cells. A row whose norm does not exist
carries ``status = NormDoesNotExist`` and the run continues.
"""
from __future__ import annotations

import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .config import ExperimentConfig
from .errors import NormDoesNotExist
from .lti import StateSpace, simulate_impulse, tf_to_ss
from .models import (
    LQR,
    AdmittanceParams,
    DampedInertia,
    Grounded,
    NoControl,
    NoMotor,
    PDTorque,
    RobotParams,
    StateFeedback,
    build_estimation,
    build_grounded,
    build_inertial,
    build_manutec,
    human_environment,
)
from .norms import sobolev_norm, with_derivative_output
from .synthesis import kalman_steady_covariance, lqr_gain

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-3
STATUS_OK = "ok"
STATUS_NO_NORM = "NormDoesNotExist"
STATUS_VIOLATION = "BoundViolated"

_T = TypeVar("_T")
_R = TypeVar("_R")


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    summary: str | None = None  # one-line human-readable digest, not part of the CSV

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(self.columns) + "\n")
        for r in self.rows:
            out.write(",".join(format_cell(r.get(c)) for c in self.columns) + "\n")
        return out.getvalue()


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    s = str(v)
    if "," in s or "\n" in s:
        raise ValueError(f"CSV cell may not contain separators: {s!r}")
    return s


def worker_count() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("COLLISION_NORM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer COLLISION_NORM_THREADS=%r", cap)
    return n


def ordered_map(fn: Callable[[_T], _R], items: Sequence[_T]) -> list[_R]:
    """Map in parallel threads, results in input order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class Lcg64:
    """Knuth's MMIX 64-bit linear congruential generator."""

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return self.state

    def uniform(self) -> float:
        """Uniform on [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) / float(1 << 53)


# ---------------------------------------------------------------- model plumbing


def robot_params(cfg: ExperimentConfig, **changes) -> RobotParams:
    values = dict(J=cfg.J, B=cfg.B, K_jt=cfg.K_jt, I=cfg.I, V=cfg.V, K_e=cfg.K_e)
    values.update(changes)
    return RobotParams(**values)


def controller_spec(name: str, cfg: ExperimentConfig):
    if name == "no-control":
        return NoControl()
    if name == "no-motor":
        return NoMotor()
    if name == "pd-torque":
        return PDTorque(cfg.K_p, cfg.K_d)
    if name == "lqr":
        return LQR(cfg.R)
    if name == "state-feedback":
        return StateFeedback(cfg.gain)
    raise ValueError(name)


def bound_and_peak(ss: StateSpace, cfg: ExperimentConfig, scale: float = 1.0) -> dict:
    """Sobolev bound and simulated peak of the ``delta`` impulse response.

    ``scale`` multiplies the impulse (the contact velocity): W scales with
    its square, bound and peak linearly.
    """
    if scale != 1.0:
        ss = ss.scale_input("delta", scale)
    try:
        norm = sobolev_norm(ss, "delta")
        resp = simulate_impulse(ss, "delta", cfg.dt, cfg.horizon)
    except NormDoesNotExist as exc:
        log.info("no norm: %s", exc)
        return {"sobolev_W": None, "sobolev_bound": None, "sim_peak": None, "sim_peak_time": None, "status": STATUS_NO_NORM}
    status = STATUS_OK
    if resp.peak > norm.bound * (1.0 + BOUND_SLACK):
        log.warning("peak %.6g exceeds bound %.6g", resp.peak, norm.bound)
        status = STATUS_VIOLATION
    return {
        "sobolev_W": norm.W,
        "sobolev_bound": norm.bound,
        "sim_peak": resp.peak,
        "sim_peak_time": resp.peak_time,
        "status": status,
    }


_RESULT = ("sobolev_W", "sobolev_bound", "sim_peak", "sim_peak_time")
_ROBOT = ("J", "B", "K_jt", "I", "V", "K_e")


def _robot_row(p: RobotParams) -> dict:
    return {k: getattr(p, k) for k in _ROBOT}


def _grounded_row(p: RobotParams, variant: str, cfg: ExperimentConfig) -> dict:
    ctrl = controller_spec(variant, cfg)
    env = Grounded(cfg.K_env)
    row = {**_robot_row(p), "controller": variant, "lqr_cost": None}
    row.update(bound_and_peak(build_grounded(p, ctrl, env), cfg, cfg.v0))
    if variant == "lqr":
        k_e = p.K_e if env.K_env is None else p.K_e * env.K_env / (p.K_e + env.K_env)
        open_loop = build_grounded(RobotParams(p.J, p.B, p.K_jt, p.I, p.V, k_e))
        row["lqr_cost"] = lqr_gain(open_loop, cfg.R).cost * cfg.v0**2
    return row


# ---------------------------------------------------------------- experiments


def run_norm(cfg: ExperimentConfig) -> Table:
    p = robot_params(cfg)
    ctrl = controller_spec(cfg.controller, cfg)
    if cfg.environment == "inertial":
        cols = (*_ROBOT, "B_h", "I_h", "controller", *_RESULT, "status")
        row = {**_robot_row(p), "B_h": cfg.B_h, "I_h": cfg.I_h, "controller": cfg.controller}
        row.update(bound_and_peak(build_inertial(p, DampedInertia(cfg.B_h, cfg.I_h), ctrl), cfg, cfg.v0))
        return Table(cols, [row])
    cols = (*_ROBOT, "controller", *_RESULT, "lqr_cost", "status")
    return Table(cols, [_grounded_row(p, cfg.controller, cfg)])


def run_simulate(cfg: ExperimentConfig) -> Table:
    """Sampled impulse response ``t, f, fdot`` of the configured model."""
    p = robot_params(cfg)
    ctrl = controller_spec(cfg.controller, cfg)
    if cfg.environment == "inertial":
        ss = build_inertial(p, DampedInertia(cfg.B_h, cfg.I_h), ctrl)
    else:
        ss = build_grounded(p, ctrl, Grounded(cfg.K_env))
    ss = ss.scale_input("delta", cfg.v0)
    resp = simulate_impulse(ss, "delta", cfg.dt, cfg.horizon)
    rows = [
        {"t": k * resp.dt, "f": float(f), "fdot": float(fd)}
        for k, (f, fd) in enumerate(zip(resp.samples_f, resp.samples_fdot))
    ]
    return Table(("t", "f", "fdot"), rows)


def run_sweep_jointstiffness(cfg: ExperimentConfig) -> Table:
    points = [(k, v) for k in cfg.K_jt_grid.values() for v in cfg.variants]
    rows = ordered_map(lambda kv: _grounded_row(robot_params(cfg, K_jt=kv[0]), kv[1], cfg), points)
    cols = (*_ROBOT, "controller", *_RESULT, "lqr_cost", "status")
    return Table(cols, rows)


def _sensings(cfg: ExperimentConfig) -> tuple[str, ...]:
    return ("impedance", "admittance") if cfg.sensing == "both" else (cfg.sensing,)


def _var_x(p: RobotParams, sensing: str, k_int: float, cfg: ExperimentConfig) -> float:
    est = build_estimation(p, sensing, k_int)
    return kalman_steady_covariance(est, np.diag(cfg.sigma_w), np.diag(cfg.sigma_v)).var_x


def run_sweep_interface(cfg: ExperimentConfig) -> Table:
    """Bound against interface stiffness, with the position variance under
    each sensing mode at ``K_int = K_e``."""
    points = [(k, s) for k in cfg.K_e_grid.values() for s in _sensings(cfg)]

    def one(point):
        k_e, sensing = point
        row = _grounded_row(robot_params(cfg, K_e=k_e), cfg.controller, cfg)
        row["K_int"] = k_e
        row["sensing"] = sensing
        row["var_x"] = _var_x(robot_params(cfg, K_e=k_e), sensing, k_e, cfg)
        return row

    cols = (*_ROBOT, "K_int", "controller", "sensing", *_RESULT, "var_x", "lqr_cost", "status")
    return Table(cols, ordered_map(one, points))


def run_estimate(cfg: ExperimentConfig) -> Table:
    k_int = cfg.K_int if cfg.K_int is not None else cfg.K_e
    p = robot_params(cfg)
    rows = [{**_robot_row(p), "K_int": k_int, "sensing": s, "var_x": _var_x(p, s, k_int, cfg)} for s in _sensings(cfg)]
    return Table((*_ROBOT, "K_int", "sensing", "var_x"), rows)


def manutec_row(a: AdmittanceParams, cfg: ExperimentConfig) -> dict:
    row = {"omega_t": a.omega_t, "M_t": a.M_t, "xi": a.xi, "K_e": a.K_e, "M": a.M, "v0": a.v0}
    try:
        tf = build_manutec(a)
    except NormDoesNotExist as exc:
        log.info("no norm: %s", exc)
        row.update({k: None for k in _RESULT})
        row["status"] = STATUS_NO_NORM
        return row
    ss = with_derivative_output(tf_to_ss(tf, input_label="delta", output_label="f"))
    row.update(bound_and_peak(ss, cfg))
    return row


def run_sweep_manutec(cfg: ExperimentConfig) -> Table:
    points = [
        AdmittanceParams(M_t=m, omega_t=w, xi=xi, K_e=cfg.manutec_K_e, M=cfg.M, v0=cfg.v0)
        for xi in cfg.xi_list
        for w in cfg.omega_t_list
        for m in cfg.M_t_grid.values()
    ]
    cols = ("omega_t", "M_t", "xi", "K_e", "M", "v0", *_RESULT, "status")
    return Table(cols, ordered_map(lambda a: manutec_row(a, cfg), points))


def run_sweep_inertial(cfg: ExperimentConfig) -> Table:
    """Human-contact grid: radius, interface stiffness factor and inertia factor."""
    points = [(r, kf, ih) for r in cfg.r_list for kf in cfg.K_e_factors for ih in cfg.I_h_factors]

    def one(point):
        r, kf, ih = point
        k_e, env = human_environment(r, kf, ih)
        p = robot_params(cfg, K_e=k_e)
        ss = build_inertial(p, env, controller_spec(cfg.controller, cfg))
        row = {"r": r, "K_e_factor": kf, "I_h_factor": ih, **_robot_row(p), "B_h": env.B_h, "I_h": env.I_h}
        row["controller"] = cfg.controller
        row.update(bound_and_peak(ss, cfg, cfg.v0))
        return row

    cols = ("r", "K_e_factor", "I_h_factor", *_ROBOT, "B_h", "I_h", "controller", *_RESULT, "status")
    return Table(cols, ordered_map(one, points))


def perturbed_params(cfg: ExperimentConfig) -> list[RobotParams]:
    """``n_samples`` robots with each parameter scaled by ``1 + e``, ``e`` uniform
    in ``[-perturbation, perturbation)``, drawn in field order from the seeded LCG."""
    rng = Lcg64(cfg.seed)
    base = robot_params(cfg)
    out = []
    for _ in range(cfg.n_samples):
        vals = {k: getattr(base, k) * (1.0 + cfg.perturbation * (2.0 * rng.uniform() - 1.0)) for k in _ROBOT}
        out.append(RobotParams(**vals))
    return out


def run_validate_bound(cfg: ExperimentConfig) -> Table:
    points = [(i, p, v) for i, p in enumerate(perturbed_params(cfg)) for v in cfg.variants]

    def one(point):
        i, p, v = point
        row = {"sample": i, **_grounded_row(p, v, cfg)}
        ok = row["status"] != STATUS_NO_NORM and row["sobolev_bound"] > 0
        row["ratio"] = row["sim_peak"] / row["sobolev_bound"] if ok else None
        return row

    rows = ordered_map(one, points)
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    summary = f"validate-bound: {len(ratios)} of {len(rows)} runs have a norm"
    if ratios:
        summary += f", max peak/bound = {max(ratios):.6f}"
    cols = ("sample", *_ROBOT, "controller", *_RESULT, "ratio", "lqr_cost", "status")
    return Table(cols, rows, summary)


RUNNERS: dict[str, Callable[[ExperimentConfig], Table]] = {
    "norm": run_norm,
    "simulate": run_simulate,
    "sweep-jointstiffness": run_sweep_jointstiffness,
    "sweep-interface": run_sweep_interface,
    "sweep-manutec": run_sweep_manutec,
    "sweep-inertial": run_sweep_inertial,
    "estimate": run_estimate,
    "validate-bound": run_validate_bound,
}


def run(cfg: ExperimentConfig) -> Table:
    return RUNNERS[cfg.experiment](cfg)


def spearman(x: Iterable[float], y: Iterable[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x, y = np.asarray(list(x), float), np.asarray(list(y), float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equal-length samples of size >= 2")

    def ranks(v):
        order = np.argsort(v, kind="mergesort")
        r = np.empty(len(v))
        r[order] = np.arange(len(v), dtype=float)
        for val in np.unique(v):
            idx = v == val
            r[idx] = r[idx].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    return float(rx @ ry) / den if den > 0 else float("nan")
