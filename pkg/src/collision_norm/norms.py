"""Sobolev W^{1,2} norm of a force response, computed as an H2 norm.

For a stable, strictly proper model with outputs ``w = [f, fdot]`` and a
unit impulse on the contact channel,

    W = ||f||_2^2 + ||fdot||_2^2 = trace(B^T L_o B),   A^T L_o + L_o A = -C_w^T C_w,

and ``max_t |f(t)| <= sqrt(W)`` because ``f(t)^2 <= 2 ||f||_2 ||fdot||_2 <= W``.
The signal-domain functions evaluate the same quantities on a simulated
response and serve as an independent check.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import matlib
from .errors import MissingDerivativeOutput, NormDoesNotExist, SolverFailure
from .lti import ImpulseResponse, StateSpace

__all__ = [
    "SobolevNorm",
    "SignalSobolev",
    "h2_norm_sq",
    "with_derivative_output",
    "sobolev_norm",
    "signal_sobolev",
    "signal_norm",
    "appendix_inequality_check",
]


class SobolevNorm(NamedTuple):
    W: float
    bound: float


class SignalSobolev(NamedTuple):
    W: float
    peak: float


def h2_norm_sq(ss: StateSpace, input_channel: str, settings: matlib.SolverSettings = matlib.DEFAULT_SETTINGS) -> float:
    """Squared H2 norm from one input to all outputs via the observability Gramian."""
    j = ss.input_index(input_channel)
    if np.any(ss.D[:, j] != 0.0):
        raise NormDoesNotExist(f"direct feedthrough from {input_channel!r}")
    if not matlib.is_hurwitz(ss.A, settings):
        raise NormDoesNotExist("A is not Hurwitz")
    q = ss.C.T @ ss.C
    if not np.any(q):
        return 0.0
    try:
        gram = matlib.lyapunov_solve(ss.A, q, settings)
    except SolverFailure as exc:
        raise NormDoesNotExist(str(exc)) from exc
    b = ss.B[:, j]
    return max(0.0, float(b @ gram @ b))


def with_derivative_output(ss: StateSpace, output: str = "f", label: str = "fdot") -> StateSpace:
    """Append ``d/dt`` of an output as the row ``C_f A``.

    Valid only when ``C_f B = 0`` and ``D_f = 0`` (relative degree two or more
    from every input), otherwise the derivative carries an impulse.
    """
    i = ss.output_index(output)
    c_f = ss.C[i]
    scale = max(1.0, float(np.max(np.abs(c_f))) * float(np.max(np.abs(ss.B))))
    if np.any(ss.D[i] != 0.0) or np.max(np.abs(c_f @ ss.B)) > 1e-12 * scale:
        raise NormDoesNotExist(f"{output!r} has relative degree below two; its derivative is not square integrable")
    return ss.with_output(label, c_f @ ss.A)


def sobolev_norm(ss: StateSpace, input_channel: str, settings: matlib.SolverSettings = matlib.DEFAULT_SETTINGS) -> SobolevNorm:
    """``W = ||f||^2 + ||fdot||^2`` and the peak bound ``sqrt(W)``.

    Uses the outputs labelled ``f`` and ``fdot``; other outputs are ignored.
    """
    if "f" not in ss.output_labels or "fdot" not in ss.output_labels:
        raise MissingDerivativeOutput(f"need outputs 'f' and 'fdot', have {ss.output_labels}")
    w = h2_norm_sq(ss.select_outputs(("f", "fdot")), input_channel, settings)
    return SobolevNorm(w, math.sqrt(w))


def _trapezoid(y: np.ndarray, dt: float) -> float:
    if len(y) < 2:
        return 0.0
    return float(dt * (np.sum(y) - 0.5 * (y[0] + y[-1])))


def signal_norm(samples: np.ndarray, dt: float, p: float = 2.0) -> float:
    """Trapezoidal ``(integral |x|^p dt)^(1/p)``."""
    return _trapezoid(np.abs(samples) ** p, dt) ** (1.0 / p)


def signal_sobolev(r: ImpulseResponse) -> SignalSobolev:
    w = _trapezoid(r.samples_f**2, r.dt) + _trapezoid(r.samples_fdot**2, r.dt)
    return SignalSobolev(w, r.peak)


def appendix_inequality_check(r: ImpulseResponse, p: float = 2.0, slack: float = 1e-9) -> bool:
    """Check ``|f(t)|^p <= p ||f||_p^(p-1) ||fdot||_p`` at every sample."""
    if not 1.0 <= p <= 8.0:
        raise ValueError("p must lie in [1, 8]")
    rhs = p * signal_norm(r.samples_f, r.dt, p) ** (p - 1.0) * signal_norm(r.samples_fdot, r.dt, p)
    return bool(np.all(np.abs(r.samples_f) ** p <= rhs + slack))
