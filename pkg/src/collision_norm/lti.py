"""Continuous-time LTI systems: SISO rational transfer functions, state-space
realizations, state feedback and exact-discretization impulse simulation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matlib
from .errors import (
    DirectFeedthrough,
    ImproperTF,
    PoleEvaluation,
    Unstable,
    UnknownChannel,
    ZeroNumerator,
)

log = logging.getLogger(__name__)

__all__ = [
    "RationalTF",
    "StateSpace",
    "ImpulseResponse",
    "tf_add",
    "tf_mul",
    "tf_div",
    "evaluate",
    "relative_degree",
    "tf_to_ss",
    "simulate_impulse",
    "close_state_feedback",
    "DEFAULT_DT",
    "DEFAULT_HORIZON",
]

DEFAULT_DT = 1e-4
DEFAULT_HORIZON = 5.0
MAX_EXTENSION = 8
DECAY_RATIO = 1e-6


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    if not all(math.isfinite(x) for x in c):
        raise ValueError("coefficients must be finite")
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class RationalTF:
    """``num(s) / den(s)`` with coefficients in ascending powers of ``s``.

    Improper values (e.g. a PD controller ``85 s + 370``) may be built and
    combined; only :func:`tf_to_ss` insists on properness.
    """

    num: tuple[float, ...]
    den: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "num", _trim(self.num))
        object.__setattr__(self, "den", _trim(self.den))
        if self.den == (0.0,):
            raise ValueError("denominator is identically zero")

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_zero(self) -> bool:
        return self.num == (0.0,)

    @property
    def is_proper(self) -> bool:
        return self.is_zero or self.num_degree <= self.den_degree

    def __add__(self, other):
        return tf_add(self, _coerce(other))

    __radd__ = __add__

    def __mul__(self, other):
        return tf_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return tf_div(self, _coerce(other))

    def __call__(self, s: complex) -> complex:
        return evaluate(self, s)


def _coerce(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    return RationalTF((float(x),))


def tf_add(a: RationalTF, b: RationalTF) -> RationalTF:
    """``a + b`` over the product denominator; common factors are kept."""
    if a.den == b.den:
        return RationalTF(np.polynomial.polynomial.polyadd(a.num, b.num), a.den)
    P = np.polynomial.polynomial
    num = P.polyadd(P.polymul(a.num, b.den), P.polymul(b.num, a.den))
    return RationalTF(num, P.polymul(a.den, b.den))


def tf_mul(a: RationalTF, b: RationalTF) -> RationalTF:
    P = np.polynomial.polynomial
    return RationalTF(P.polymul(a.num, b.num), P.polymul(a.den, b.den))


def tf_div(a: RationalTF, b: RationalTF) -> RationalTF:
    if b.is_zero:
        raise ZeroDivisionError("division by the zero transfer function")
    P = np.polynomial.polynomial
    return RationalTF(P.polymul(a.num, b.den), P.polymul(a.den, b.num))


def _horner(coeffs: Sequence[float], s: complex) -> complex:
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


def evaluate(g: RationalTF, s: complex) -> complex:
    d = _horner(g.den, s)
    if abs(d) < 1e-300:
        raise PoleEvaluation(f"s = {s} is a pole")
    return _horner(g.num, s) / d


def relative_degree(g: RationalTF) -> int:
    if g.is_zero:
        raise ZeroNumerator("relative degree of the zero transfer function is undefined")
    return g.den_degree - g.num_degree


# ----------------------------------------------------------------- state space


@dataclass(frozen=True)
class StateSpace:
    """``dx/dt = A x + B u``, ``y = C x + D u`` with named inputs, outputs and states."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_labels: tuple[str, ...]
    output_labels: tuple[str, ...]
    state_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        a = matlib.as_matrix(self.A, "A")
        n = a.shape[0]
        b = matlib.as_matrix(np.reshape(self.B, (n, -1)), "B")
        c = matlib.as_matrix(np.reshape(self.C, (-1, n)), "C")
        d = matlib.as_matrix(np.reshape(self.D, (c.shape[0], b.shape[1])), "D")
        if a.shape != (n, n):
            raise ValueError(f"A must be square, got {a.shape}")
        for name, m in (("A", a), ("B", b), ("C", c), ("D", d)):
            object.__setattr__(self, name, m)
        ins = tuple(self.input_labels)
        outs = tuple(self.output_labels)
        states = tuple(self.state_labels) or tuple(f"x{i}" for i in range(n))
        for kind, labels, size in (("input", ins, b.shape[1]), ("output", outs, c.shape[0]), ("state", states, n)):
            if len(labels) != size:
                raise ValueError(f"{size} {kind}s but {len(labels)} labels")
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate {kind} labels: {labels}")
        object.__setattr__(self, "input_labels", ins)
        object.__setattr__(self, "output_labels", outs)
        object.__setattr__(self, "state_labels", states)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def input_index(self, name: str) -> int:
        try:
            return self.input_labels.index(name)
        except ValueError:
            raise UnknownChannel(f"no input named {name!r}; have {self.input_labels}") from None

    def output_index(self, name: str) -> int:
        try:
            return self.output_labels.index(name)
        except ValueError:
            raise UnknownChannel(f"no output named {name!r}; have {self.output_labels}") from None

    def state_index(self, name: str) -> int:
        try:
            return self.state_labels.index(name)
        except ValueError:
            raise UnknownChannel(f"no state named {name!r}; have {self.state_labels}") from None

    def select_outputs(self, names: Sequence[str]) -> "StateSpace":
        rows = [self.output_index(n) for n in names]
        return StateSpace(self.A, self.B, self.C[rows], self.D[rows], self.input_labels, tuple(names), self.state_labels)

    def with_output(self, label: str, c_row, d_row=None) -> "StateSpace":
        c_row = np.reshape(np.asarray(c_row, dtype=float), (1, self.n_states))
        d_row = np.zeros((1, self.B.shape[1])) if d_row is None else np.reshape(d_row, (1, -1))
        return StateSpace(
            self.A,
            self.B,
            np.vstack([self.C, c_row]),
            np.vstack([self.D, d_row]),
            self.input_labels,
            self.output_labels + (label,),
            self.state_labels,
        )

    def scale_input(self, name: str, factor: float) -> "StateSpace":
        j = self.input_index(name)
        b = np.array(self.B)
        d = np.array(self.D)
        b[:, j] *= factor
        d[:, j] *= factor
        return StateSpace(self.A, b, self.C, d, self.input_labels, self.output_labels, self.state_labels)

    def frequency_response(self, s: complex) -> np.ndarray:
        """``C (sI - A)^-1 B + D`` at one complex frequency."""
        n = self.n_states
        x = np.linalg.solve(s * np.eye(n) - self.A, self.B.astype(complex))
        return self.C @ x + self.D


def tf_to_ss(g: RationalTF, input_label: str = "u", output_label: str = "f") -> StateSpace:
    """Controllable canonical realization of a proper transfer function."""
    if not g.is_proper:
        raise ImproperTF(f"numerator degree {g.num_degree} exceeds denominator degree {g.den_degree}")
    n = g.den_degree
    if n == 0:
        raise ImproperTF("a static gain has no state realization")
    lead = g.den[-1]
    den = np.array(g.den) / lead
    num = np.zeros(n + 1)
    num[: len(g.num)] = np.array(g.num) / lead
    d = num[n]
    rem = num[:n] - d * den[:n]
    a = np.zeros((n, n))
    a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = -den[:n]
    b = np.zeros((n, 1))
    b[-1, 0] = 1.0
    return StateSpace(a, b, rem.reshape(1, n), [[d]], (input_label,), (output_label,))


def close_state_feedback(ss: StateSpace, gain, input_channel: str) -> StateSpace:
    """Close ``u = gain @ x`` on one input: ``A + B_u gain``; the input is removed."""
    j = ss.input_index(input_channel)
    gain = np.reshape(np.asarray(gain, dtype=float), (1, -1))
    if gain.shape[1] != ss.n_states:
        raise ValueError(f"gain has {gain.shape[1]} columns, model has {ss.n_states} states")
    keep = [i for i in range(len(ss.input_labels)) if i != j]
    a = ss.A + ss.B[:, [j]] @ gain
    c = ss.C + ss.D[:, [j]] @ gain
    return StateSpace(
        a,
        ss.B[:, keep].reshape(ss.n_states, len(keep)),
        c,
        ss.D[:, keep].reshape(ss.C.shape[0], len(keep)),
        tuple(ss.input_labels[i] for i in keep),
        ss.output_labels,
        ss.state_labels,
    )


# ------------------------------------------------------------------ simulation


@dataclass(frozen=True)
class ImpulseResponse:
    dt: float
    horizon: float
    samples_f: np.ndarray
    samples_fdot: np.ndarray
    outputs: dict[str, np.ndarray] = field(default_factory=dict, compare=False)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples_f))

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples_f))) if len(self.samples_f) else 0.0

    @property
    def peak_time(self) -> float:
        return float(self.dt * np.argmax(np.abs(self.samples_f)))


_BLOCK = 1024


class _Propagator:
    """Samples ``C Phi^k x`` for many k with one batched product per block of steps."""

    def __init__(self, phi: np.ndarray, c: np.ndarray):
        n = phi.shape[0]
        powers = np.empty((_BLOCK, n, n))
        powers[0] = np.eye(n)
        filled = 1
        while filled < _BLOCK:
            step = min(filled, _BLOCK - filled)
            powers[filled : filled + step] = powers[:step] @ (powers[filled - 1] @ phi)
            filled += step
        self.powers = powers
        self.c_powers = c @ powers
        self.jump = powers[-1] @ phi

    def run(self, x0: np.ndarray, steps: int) -> tuple[np.ndarray, np.ndarray]:
        """Outputs at k = 0..steps and the state at k = steps."""
        total = steps + 1
        nblocks = -(-total // _BLOCK)
        out = np.empty((nblocks * _BLOCK, self.c_powers.shape[1]))
        x = np.array(x0, dtype=float)
        for i in range(nblocks):
            out[i * _BLOCK : (i + 1) * _BLOCK] = self.c_powers @ x
            if i < nblocks - 1:
                x = self.jump @ x
        x_end = self.powers[steps - (nblocks - 1) * _BLOCK] @ x
        return out[:total], x_end


def simulate_impulse(
    ss: StateSpace,
    input_channel: str,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
) -> ImpulseResponse:
    """Unit impulse response on one input, stepped exactly with ``expm(A dt)``.

    The impulse is applied as the initial state ``x0 = B[:, input_channel]``.
    ``f`` is the output labelled ``"f"`` (or the first output); ``fdot`` is
    the output labelled ``"fdot"`` or, when absent, ``C_f A x``. The horizon
    is doubled (up to 8x) until the state norm decays below 1e-6 of its
    initial value.

    Raises
    ------
    DirectFeedthrough
        If any output has a nonzero D entry for the channel.
    Unstable
        If the state has grown when the extension budget runs out.
    """
    j = ss.input_index(input_channel)
    if np.any(ss.D[:, j] != 0.0):
        raise DirectFeedthrough(f"nonzero feedthrough from {input_channel!r}: impulse response is unbounded")
    if not dt > 0 or horizon < 10 * dt:
        raise ValueError("need dt > 0 and horizon >= 10 dt")
    f_row = ss.output_index("f") if "f" in ss.output_labels else 0
    c = ss.C
    labels = list(ss.output_labels)
    if "fdot" not in ss.output_labels:
        c = np.vstack([c, ss.C[f_row] @ ss.A])
        labels.append("fdot")
    fdot_row = labels.index("fdot")

    x0 = ss.B[:, j]
    x0_norm = float(np.linalg.norm(x0))
    prop = _Propagator(matlib.expm(ss.A * dt), c)
    steps = int(math.floor(horizon / dt + 1e-9))
    chunks = []
    ys, x = prop.run(x0, steps)
    chunks.append(ys)
    done = steps
    factor = 1
    while float(np.linalg.norm(x)) > DECAY_RATIO * x0_norm and factor < MAX_EXTENSION:
        ys, x = prop.run(x, done)
        chunks.append(ys[1:])
        done *= 2
        factor *= 2
        if not np.all(np.isfinite(ys)):
            break
    xn = float(np.linalg.norm(x))
    if not math.isfinite(xn) or xn > x0_norm:
        raise Unstable(f"state grew to {xn:.3e} (from {x0_norm:.3e}) within {factor * horizon:g} s")
    if xn > DECAY_RATIO * x0_norm:
        log.warning("impulse response not fully decayed after %g s (ratio %.2e)", factor * horizon, xn / x0_norm)
    y = np.concatenate(chunks)
    outputs = {name: y[:, i].copy() for i, name in enumerate(labels)}
    return ImpulseResponse(
        dt=dt,
        horizon=done * dt,
        samples_f=outputs[labels[f_row]],
        samples_fdot=outputs["fdot"],
        outputs=outputs,
    )
