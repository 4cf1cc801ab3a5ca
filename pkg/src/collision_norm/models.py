"""Model constructors: the two-inertia flexible-joint robot against grounded
and inertial environments, the estimation model and the admittance-controlled
Manutec contact loop.

State conventions
-----------------
grounded:   [theta, theta_dot, q, q_dot]            (environment fixed, x = 0)
inertial:   [theta - x, theta_dot, q - x, q_dot, x_dot]
estimation: [theta, theta_dot, q, q_dot, x]         (x static)

Controller gains follow ``tau_m = -K xi``: a PD torque loop on the joint
spring is ``K = K_jt [K_p, K_d, -K_p, -K_d]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Literal, Union

import numpy as np

from . import matlib
from .errors import InvalidParams, UnstableClosedLoop
from .lti import RationalTF, StateSpace, close_state_feedback, relative_degree, tf_add, tf_mul, tf_to_ss

__all__ = [
    "RobotParams",
    "REFERENCE_ROBOT",
    "Grounded",
    "DampedInertia",
    "NoControl",
    "NoMotor",
    "PDTorque",
    "StateFeedback",
    "LQR",
    "ControllerSpec",
    "AdmittanceParams",
    "MANUTEC_PLANT",
    "MANUTEC_POSITION_CONTROLLER",
    "human_environment",
    "build_grounded",
    "build_inertial",
    "build_estimation",
    "assemble_manutec",
    "build_manutec",
]


@dataclass(frozen=True)
class RobotParams:
    """Motor inertia J, motor damping B, joint stiffness K_jt, link inertia I,
    link damping V and interface stiffness K_e (rotational SI units)."""

    J: float
    B: float
    K_jt: float
    I: float
    V: float
    K_e: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InvalidParams(f"{f.name} must be finite")
            if f.name in ("B", "V"):
                if v < 0:
                    raise InvalidParams(f"{f.name} must be >= 0, got {v}")
            elif v <= 0:
                raise InvalidParams(f"{f.name} must be > 0, got {v}")


# KUKA LWR first joint in contact with a 30 kNm/rad interface.
REFERENCE_ROBOT = RobotParams(J=3.19, B=24.3, K_jt=10e3, I=4.5, V=20.3, K_e=30e3)


@dataclass(frozen=True)
class Grounded:
    """Pure stiffness to ground; ``K_env`` (if given) is in series with ``K_e``."""

    K_env: float | None = None

    def __post_init__(self):
        if self.K_env is not None and not (math.isfinite(self.K_env) and self.K_env > 0):
            raise InvalidParams("K_env must be a positive finite stiffness")


@dataclass(frozen=True)
class DampedInertia:
    """Environment ``I_h x'' + B_h x' = f``."""

    B_h: float
    I_h: float

    def __post_init__(self):
        if not (math.isfinite(self.B_h) and self.B_h >= 0):
            raise InvalidParams("B_h must be >= 0")
        if not (math.isfinite(self.I_h) and self.I_h > 0):
            raise InvalidParams("I_h must be > 0")


def human_environment(r: float, k_factor: float, i_factor: float) -> tuple[float, DampedInertia]:
    """Human contact at radius ``r`` [m]: ``K_e = k_factor r^2`` kNm/rad,
    ``B_h = 75 r^2``, ``I_h = i_factor r^2``. Returns ``(K_e, environment)``."""
    return k_factor * r * r * 1e3, DampedInertia(B_h=75.0 * r * r, I_h=i_factor * r * r)


@dataclass(frozen=True)
class NoControl:
    name = "no-control"


@dataclass(frozen=True)
class NoMotor:
    name = "no-motor"


@dataclass(frozen=True)
class PDTorque:
    K_p: float = 1.5
    K_d: float = 0.2
    name = "pd-torque"

    def gain(self, K_jt: float) -> np.ndarray:
        return K_jt * np.array([[self.K_p, self.K_d, -self.K_p, -self.K_d, 0.0]])


@dataclass(frozen=True)
class StateFeedback:
    gain: tuple[float, ...]
    name = "state-feedback"

    def __post_init__(self):
        g = tuple(float(x) for x in np.ravel(self.gain))
        if len(g) not in (4, 5) or not all(math.isfinite(x) for x in g):
            raise InvalidParams("state-feedback gain needs 4 or 5 finite entries")
        object.__setattr__(self, "gain", g)


@dataclass(frozen=True)
class LQR:
    R: float = 5.0
    name = "lqr"

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidParams("LQR weight R must be positive")


ControllerSpec = Union[NoControl, NoMotor, PDTorque, StateFeedback, LQR]

_OUTPUTS = ("f", "fdot")


def _grounded_open_loop(p: RobotParams, k_e: float) -> StateSpace:
    J, B, K, I, V = p.J, p.B, p.K_jt, p.I, p.V
    a = [
        [0, 1, 0, 0],
        [-K / J, -B / J, K / J, 0],
        [0, 0, 0, 1],
        [K / I, 0, -(K + k_e) / I, -V / I],
    ]
    b = [[0, 0], [1, 1 / J], [0, 0], [1, 0]]
    c = [[0, 0, k_e, 0], [0, 0, 0, k_e]]
    return StateSpace(a, b, c, np.zeros((2, 2)), ("delta", "tau"), _OUTPUTS, ("theta", "theta_dot", "q", "q_dot"))


def _link_only(p: RobotParams, k_e: float) -> StateSpace:
    a = [[0, 1], [-k_e / p.I, -p.V / p.I]]
    return StateSpace(a, [[0], [1]], [[k_e, 0], [0, k_e]], np.zeros((2, 1)), ("delta",), _OUTPUTS, ("q", "q_dot"))


def _controller_gain(c: ControllerSpec, p: RobotParams, open_loop: StateSpace) -> np.ndarray:
    """Feedback gain K (tau = -K xi) on the four robot states."""
    if isinstance(c, PDTorque):
        return c.gain(p.K_jt)[:, :4]
    if isinstance(c, StateFeedback):
        return np.array([c.gain[:4]])
    if isinstance(c, LQR):
        from .synthesis import lqr_gain

        return lqr_gain(open_loop, c.R).gain[:, :4]
    raise InvalidParams(f"unsupported controller {c!r}")


def build_grounded(p: RobotParams, c: ControllerSpec = NoControl(), env: Grounded = Grounded()) -> StateSpace:
    """Robot against a stiffness to ground, impulse input ``delta``.

    ``delta`` puts unit velocity on both inertias. With ``NoControl`` the
    open ``tau`` input is kept (needed for LQR synthesis); any feedback
    controller consumes it.
    """
    k_e = p.K_e if env.K_env is None else p.K_e * env.K_env / (p.K_e + env.K_env)
    if isinstance(c, NoMotor):
        return _link_only(p, k_e)
    ss = _grounded_open_loop(p, k_e)
    if isinstance(c, NoControl):
        return ss
    return close_state_feedback(ss, -_controller_gain(c, p, ss), "tau")


def build_inertial(p: RobotParams, env: DampedInertia, c: ControllerSpec = NoControl()) -> StateSpace:
    """Robot against a damped inertia driven by ``f = K_e (q - x)``.

    Positions are taken relative to the environment, which removes the
    free rigid-body mode (a common shift of all positions) and leaves a
    Hurwitz model whenever the damping is positive. The environment starts
    at rest. State-feedback position gains act on these relative positions.
    """
    if not isinstance(env, DampedInertia):
        raise InvalidParams("build_inertial needs a DampedInertia environment")
    J, B, K, I, V, Ke = p.J, p.B, p.K_jt, p.I, p.V, p.K_e
    Bh, Ih = env.B_h, env.I_h
    if isinstance(c, NoMotor):
        a = [[0, 1, -1], [-Ke / I, -V / I, 0], [Ke / Ih, 0, -Bh / Ih]]
        c_w = [[Ke, 0, 0], [0, Ke, -Ke]]
        return StateSpace(a, [[0], [1], [0]], c_w, np.zeros((2, 1)), ("delta",), _OUTPUTS, ("q_rel", "q_dot", "x_dot"))
    a = [
        [0, 1, 0, 0, -1],
        [-K / J, -B / J, K / J, 0, 0],
        [0, 0, 0, 1, -1],
        [K / I, 0, -(K + Ke) / I, -V / I, 0],
        [0, 0, Ke / Ih, 0, -Bh / Ih],
    ]
    b = [[0, 0], [1, 1 / J], [0, 0], [1, 0], [0, 0]]
    c_w = [[0, 0, Ke, 0, 0], [0, 0, 0, Ke, -Ke]]
    ss = StateSpace(
        a, b, c_w, np.zeros((2, 2)), ("delta", "tau"), _OUTPUTS, ("theta_rel", "theta_dot", "q_rel", "q_dot", "x_dot")
    )
    if isinstance(c, NoControl):
        return ss
    k4 = _controller_gain(c, p, _grounded_open_loop(p, Ke))
    gain = np.hstack([k4, [[0.0]]])
    return close_state_feedback(ss, -gain, "tau")


Sensing = Literal["impedance", "admittance"]


def build_estimation(p: RobotParams, sensing: Sensing, K_int: float) -> StateSpace:
    """Five-state model with a static environment position ``x`` and the
    two-channel emission of an impedance (joint torque) or admittance
    (interface force) controlled robot. ``K_int`` replaces ``p.K_e``."""
    if not (math.isfinite(K_int) and K_int > 0):
        raise InvalidParams("K_int must be positive")
    J, B, K, I, V = p.J, p.B, p.K_jt, p.I, p.V
    a = [
        [0, 1, 0, 0, 0],
        [-K / J, -B / J, K / J, 0, 0],
        [0, 0, 0, 1, 0],
        [K / I, 0, -(K + K_int) / I, -V / I, K_int / I],
        [0, 0, 0, 0, 0],
    ]
    b = [[0, 0, 0], [1, 1 / J, 0], [0, 0, 0], [1, 0, 0], [0, 0, 1]]
    if sensing == "impedance":
        c = [[1, 0, 0, 0, 0], [K, 0, -K, 0, 0]]
        outs = ("theta", "joint_torque")
    elif sensing == "admittance":
        c = [[1, 0, 0, 0, 0], [0, 0, K_int, 0, -K_int]]
        outs = ("theta", "interface_force")
    else:
        raise InvalidParams(f"sensing must be 'impedance' or 'admittance', got {sensing!r}")
    return StateSpace(a, b, c, np.zeros((2, 3)), ("delta", "tau", "xdot"), outs, ("theta", "theta_dot", "q", "q_dot", "x"))


# ------------------------------------------------------------------ Manutec r3

MANUTEC_PLANT = RationalTF(num=(1.0,), den=(0.0, 40.0, 308.0))  # G(s) = 1 / (308 s^2 + 40 s)
MANUTEC_POSITION_CONTROLLER = RationalTF(num=(370.0, 85.0))  # C(s) = 85 s + 370


@dataclass(frozen=True)
class AdmittanceParams:
    """Target admittance ``1 / (M_t (s^2 + 2 xi omega_t s + omega_t^2))`` in
    contact with stiffness ``K_e`` [N/m]; robot mass ``M``, contact velocity ``v0``."""

    M_t: float
    omega_t: float
    xi: float
    K_e: float = 5.6e4
    M: float = 308.0
    v0: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParams(f"{f.name} must be positive, got {v}")


def assemble_manutec(a: AdmittanceParams) -> RationalTF:
    """Contact response ``G (M v0) / (1 + C A G K_e + G C + G K_e)``, unchecked.

    Assembled over the common denominator ``g(s) M_t a(s)`` (``G = 1/g``,
    ``A = 1/(M_t a)``) so that no pole-zero pair is left at the free
    integrator of ``G``:

        F = M v0 M_t a / (M_t a g + C K_e + C M_t a + K_e M_t a)
    """
    g = RationalTF(MANUTEC_PLANT.den)  # the polynomial g(s)
    c = MANUTEC_POSITION_CONTROLLER
    mt_a = RationalTF((a.M_t * a.omega_t**2, a.M_t * 2.0 * a.xi * a.omega_t, a.M_t))
    k_e = RationalTF((a.K_e,))
    char = tf_add(
        tf_add(tf_mul(mt_a, g), tf_mul(c, k_e)),
        tf_add(tf_mul(c, mt_a), tf_mul(k_e, mt_a)),
    )
    num = tf_mul(RationalTF((a.M * a.v0,)), mt_a)
    return RationalTF(num.num, char.num)


def build_manutec(a: AdmittanceParams) -> RationalTF:
    """:func:`assemble_manutec` plus the existence checks for the Sobolev norm.

    Raises
    ------
    UnstableClosedLoop
        If the characteristic polynomial is not Hurwitz.
    """
    f = assemble_manutec(a)
    if relative_degree(f) < 2:
        raise InvalidParams("assembled contact response has relative degree below two")
    if not matlib.is_hurwitz(tf_to_ss(f).A):
        raise UnstableClosedLoop(
            f"admittance loop unstable for M_t={a.M_t:g}, omega_t={a.omega_t:g}, xi={a.xi:g}"
        )
    return f
