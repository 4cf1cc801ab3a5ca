"""LQR gains that trade Sobolev norm against torque, and steady-state Kalman covariance."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import matlib
from .lti import StateSpace

__all__ = ["LQRGain", "KalmanCovariance", "lqr_gain", "kalman_steady_covariance"]


class LQRGain(NamedTuple):
    gain: np.ndarray  # 1 x 5, torque = -gain @ [theta, theta_dot, q, q_dot, x]
    cost: float  # minimum of W + integral R tau^2 for the unit impulse
    S: np.ndarray


def lqr_gain(
    model: StateSpace,
    R: float,
    control_channel: str = "tau",
    impulse_channel: str = "delta",
    settings: matlib.SolverSettings = matlib.DEFAULT_SETTINGS,
) -> LQRGain:
    """Minimize ``||f||^2 + ||fdot||^2 + integral R tau^2`` over state feedback.

    ``model`` is the open-loop grounded robot (4 states, outputs ``f`` and
    ``fdot``). The returned gain follows the ``tau = -K xi`` convention and is
    zero-padded to five entries; the environment position is uncontrollable
    from the motor and gets no feedback.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    c_w = model.select_outputs(("f", "fdot")).C
    b_tau = model.B[:, [model.input_index(control_channel)]]
    s = matlib.solve_care(model.A, b_tau, c_w.T @ c_w, [[R]], settings)
    k = (b_tau.T @ s) / R
    n = model.n_states
    gain = np.zeros((1, max(n + 1, 5)))
    gain[:, :n] = k
    b_d = model.B[:, model.input_index(impulse_channel)]
    return LQRGain(gain, float(b_d @ s @ b_d), s)


class KalmanCovariance(NamedTuple):
    P: np.ndarray
    var_x: float


def kalman_steady_covariance(
    est: StateSpace,
    Sigma_w,
    Sigma_v,
    state: str = "x",
    settings: matlib.SolverSettings = matlib.DEFAULT_SETTINGS,
) -> KalmanCovariance:
    """Steady-state posterior covariance of the continuous Kalman-Bucy filter.

    Solves ``A P + P A^T - P C^T Sigma_v^-1 C P + Sigma_w = 0`` as the control
    Riccati equation of the dual pair ``(A^T, C^T)``; ``est.C`` is the
    emission matrix.
    """
    p = matlib.solve_care(est.A.T, est.C.T, Sigma_w, Sigma_v, settings)
    i = est.state_index(state)
    return KalmanCovariance(p, float(p[i, i]))
