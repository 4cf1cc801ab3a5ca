"""Dense real linear-algebra kernels.

Everything here works on small (n <= ~50) float64 arrays. Matrices are
plain ``numpy.ndarray`` objects; :func:`as_matrix` validates and freezes
them. Only elementwise numpy arithmetic and matrix products are used, the
factorizations and equation solvers are written out here.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import NoStabilizingSolution, NotSymmetric, SingularMatrix, SolverFailure

__all__ = [
    "SolverSettings",
    "DEFAULT_SETTINGS",
    "as_matrix",
    "inf_norm",
    "lu_factor",
    "lu_solve",
    "inv",
    "lstsq",
    "cholesky",
    "expm",
    "lyapunov_solve",
    "lyapunov_residual",
    "solve_care",
    "care_residual",
    "is_hurwitz",
    "record_residuals",
    "ResidualRecord",
]


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances for every kernel in this module."""

    pivot_tol: float = 1e-13
    symmetry_tol: float = 1e-10
    lyapunov_tol: float = 1e-8
    care_tol: float = 1e-7
    sign_tol: float = 1e-12
    sign_max_iter: int = 100
    refine_steps: int = 3
    newton_steps: int = 1
    # extra Newton-Kleinman sweeps allowed when one step leaves the residual
    # above care_tol
    newton_max_extra: int = 4


DEFAULT_SETTINGS = SolverSettings()


class ResidualRecord(NamedTuple):
    kind: str
    scaled_residual: float
    tolerance: float


_residual_log: ContextVar[list[ResidualRecord] | None] = ContextVar(
    "collision_norm_residual_log", default=None
)


@contextmanager
def record_residuals() -> Iterator[list[ResidualRecord]]:
    """Collect the scaled residual of every Lyapunov/CARE solve in this context.

    >>> with record_residuals() as log:
    ...     _ = lyapunov_solve([[-1.0]], [[1.0]])
    >>> log[0].kind
    'lyapunov'
    """
    log: list[ResidualRecord] = []
    token = _residual_log.set(log)
    try:
        yield log
    finally:
        _residual_log.reset(token)


def _record(kind: str, value: float, tol: float) -> None:
    log = _residual_log.get()
    if log is not None:
        log.append(ResidualRecord(kind, value, tol))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return a read-only 2-D float64 copy of ``a``, rejecting NaN/Inf."""
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _square(a, name: str) -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    return m


def inf_norm(a) -> float:
    """Maximum absolute row sum."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


# --------------------------------------------------------------------------- LU


def lu_factor(a, settings: SolverSettings = DEFAULT_SETTINGS) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle LU with partial pivoting, packed into one array.

    Returns ``(lu, perm)`` such that ``a[perm] = L @ U`` with unit-diagonal
    ``L`` below the diagonal of ``lu`` and ``U`` on and above it.
    """
    lu = np.array(_square(a, "A"), dtype=float)
    n = lu.shape[0]
    scale = inf_norm(lu)
    threshold = settings.pivot_tol * scale
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        pivot = lu[p, k]
        if scale == 0.0 or abs(pivot) < threshold:
            raise SingularMatrix(f"pivot {abs(pivot):.3e} below {threshold:.3e} at column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1 :, k] /= pivot
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm


def _lu_substitute(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    x = np.array(b[perm], dtype=float)
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1 :] @ x[i + 1 :]) / lu[i, i]
    return x


def lu_solve(a, b, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Solve ``a @ x = b``. ``b`` may be a vector or an n x m matrix."""
    lu, perm = lu_factor(a, settings)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != lu.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {lu.shape[0]}")
    return _lu_substitute(lu, perm, b)


def inv(a, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    a = _square(a, "A")
    return lu_solve(a, np.eye(a.shape[0]), settings)


def lstsq(m, rhs, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Least-squares solution of a tall full-column-rank system by Householder QR."""
    r = np.array(as_matrix(m, "M"), dtype=float)
    y = np.array(rhs, dtype=float)
    rows, cols = r.shape
    if rows < cols:
        raise ValueError("lstsq expects at least as many rows as columns")
    scale = max(inf_norm(r), np.finfo(float).tiny)
    for k in range(cols):
        x = r[k:, k]
        normx = math.sqrt(float(x @ x))
        if normx == 0.0:
            continue
        alpha = -math.copysign(normx, x[0])
        v = x.copy()
        v[0] -= alpha
        vv = float(v @ v)
        r[k:, k:] -= np.outer(v, (2.0 / vv) * (v @ r[k:, k:]))
        y[k:] -= np.outer(v, (2.0 / vv) * (v @ y[k:])) if y.ndim == 2 else v * (2.0 / vv) * (v @ y[k:])
    diag = np.abs(np.diag(r[:cols, :cols]))
    if np.any(diag < settings.pivot_tol * scale):
        raise SingularMatrix("least-squares system is rank deficient")
    x = np.array(y[:cols], dtype=float)
    for i in range(cols - 1, -1, -1):
        x[i] = (x[i] - r[i, i + 1 : cols] @ x[i + 1 :]) / r[i, i]
    return x


# --------------------------------------------------------------------- Cholesky


def cholesky(a, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray | None:
    """Lower Cholesky factor of a symmetric matrix, or ``None`` if not positive definite.

    Raises
    ------
    NotSymmetric
        If ``a`` differs from its transpose by more than the relative symmetry tolerance.
    """
    a = _square(a, "A")
    size = float(np.max(np.abs(a)))
    if np.max(np.abs(a - a.T)) > settings.symmetry_tol * max(size, 1e-300):
        raise NotSymmetric("matrix is not symmetric")
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            return None
        low[j, j] = math.sqrt(d)
        low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


# -------------------------------------------------------------------- expm

# Pade(13, 13) numerator coefficients and the matching scaling threshold
# (Higham, "The scaling and squaring method for the matrix exponential revisited").
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(a, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 diagonal Pade approximant."""
    a = _square(a, "A")
    n = a.shape[0]
    norm1 = float(np.max(np.sum(np.abs(a), axis=0)))
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA13)))) if norm1 > _THETA13 else 0
    x = a / (2.0**s)
    b = _PADE13
    ident = np.eye(n)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x2 @ x4
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident)
    v = x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident
    r = lu_solve(v - u, v + u, settings)
    for _ in range(s):
        r = r @ r
    return r


# -------------------------------------------------------------------- Lyapunov


def _lyapunov_lhs(a, l_mat, q) -> np.ndarray:
    # extended precision: the terms are ~||A|| ||L|| while the sum is ~eps of that
    a = np.asarray(a, dtype=np.longdouble)
    l_mat = np.asarray(l_mat, dtype=np.longdouble)
    return a.T @ l_mat + l_mat @ a + np.asarray(q, dtype=np.longdouble)


def lyapunov_residual(a, l_mat, q) -> float:
    """``||A^T L + L A + Q||_inf``, evaluated in extended precision."""
    return inf_norm(_lyapunov_lhs(a, l_mat, q).astype(float))


def _lyapunov_refined(a: np.ndarray, q: np.ndarray, settings: SolverSettings) -> tuple[np.ndarray, float]:
    """Kronecker solve plus refinement; returns ``(L, ||A^T L + L A + Q||_inf)``."""
    n = a.shape[0]
    if q.shape != a.shape:
        raise ValueError("A and Q must have equal shapes")
    ident = np.eye(n)
    big = np.kron(ident, a.T) + np.kron(a.T, ident)
    lu, perm = lu_factor(big, settings)
    sol = _lu_substitute(lu, perm, -q.reshape(-1, order="F")).reshape(n, n, order="F")
    sol = 0.5 * (sol + sol.T)
    res = lyapunov_residual(a, sol, q)
    target = settings.lyapunov_tol * inf_norm(q)
    for _ in range(settings.refine_steps):
        if res <= target:
            break
        lhs = _lyapunov_lhs(a, sol, q).astype(float)
        sol = sol + _lu_substitute(lu, perm, -lhs.reshape(-1, order="F")).reshape(n, n, order="F")
        sol = 0.5 * (sol + sol.T)
        res = lyapunov_residual(a, sol, q)
    return sol, res


def lyapunov_solve(a, q, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Solve ``A^T L + L A + Q = 0`` by Kronecker vectorization.

    The n^2 x n^2 system ``(I kron A^T + A^T kron I) vec(L) = -vec(Q)`` is
    solved with :func:`lu_solve`; iterative refinement against an
    extended-precision residual follows if the residual misses tolerance.

    Raises
    ------
    SingularMatrix
        When two eigenvalues of ``A`` sum to (numerically) zero, e.g. any
        imaginary-axis mode.
    SolverFailure
        When the residual stays above ``lyapunov_tol * ||Q||_inf``.
    """
    a = _square(a, "A")
    q = _square(q, "Q")
    sol, res = _lyapunov_refined(a, q, settings)
    qnorm = inf_norm(q)
    scaled = res / qnorm if qnorm > 0 else res
    _record("lyapunov", scaled, settings.lyapunov_tol)
    if res > settings.lyapunov_tol * qnorm:
        raise SolverFailure(f"Lyapunov residual {scaled:.3e} exceeds {settings.lyapunov_tol:.0e}")
    sol.setflags(write=False)
    return sol


# A^T L + L A = -(I + E) with L > 0 and ||E||_2 < 1 proves A Hurwitz.
_CERTIFICATE_MARGIN = 0.5


def is_hurwitz(a, settings: SolverSettings = DEFAULT_SETTINGS) -> bool:
    """True iff every eigenvalue of ``a`` has negative real part.

    Decided by the Lyapunov test: ``A^T L + L A + I = 0`` has a positive
    definite solution exactly when ``A`` is Hurwitz. ``A`` is balanced
    first; the answer is similarity invariant and the solve better scaled.

    The solve counts as successful when its residual ``E`` satisfies
    ``||E||_inf < 1/2``; together with ``L > 0`` that already certifies
    ``A^T L + L A < 0``. Demanding more would turn rounding error in very
    stiff (``||A|| ||L|| ~ 1e8``) but clearly stable matrices into a false
    negative.
    """
    a, _ = _balance(_square(a, "A"))
    try:
        sol, res = _lyapunov_refined(a, np.eye(a.shape[0]), settings)
    except SolverFailure:
        return False
    _record("hurwitz-certificate", res, _CERTIFICATE_MARGIN)
    if not (math.isfinite(res) and res < _CERTIFICATE_MARGIN):
        return False
    return cholesky(sol, settings) is not None


# ------------------------------------------------------------------------ CARE


def care_residual(a, b, q, r, s) -> tuple[float, float]:
    """Return ``(||A^T S + S A - S B R^-1 B^T S + Q||_inf, scale)``.

    ``scale`` is ``||Q|| + ||S||^2 ||B R^-1 B^T||``, the normalizer used for
    the solver tolerance.
    """
    b = np.asarray(b, dtype=float)
    g = b @ inv(r) @ b.T
    scale = inf_norm(q) + inf_norm(s) ** 2 * inf_norm(g)
    a, g, q, s = (np.asarray(m, dtype=np.longdouble) for m in (a, g, q, s))
    res = inf_norm((a.T @ s + s @ a - s @ g @ s + q).astype(float))
    return res, scale


def _balance(m: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal similarity ``D^-1 M D`` (powers of two) equalizing row and column norms."""
    m = np.array(m, dtype=float)
    n = m.shape[0]
    d = np.ones(n)
    for _ in range(max_sweeps):
        done = True
        for i in range(n):
            col = float(np.sum(np.abs(m[:, i]))) - abs(m[i, i])
            row = float(np.sum(np.abs(m[i, :]))) - abs(m[i, i])
            if col == 0.0 or row == 0.0:
                continue
            f = 2.0 ** round(0.5 * math.log2(row / col))
            if f != 1.0 and col * f + row / f < 0.95 * (col + row):
                m[:, i] *= f
                m[i, :] /= f
                d[i] *= f
                done = False
        if done:
            break
    return m, d


def _matrix_sign(z: np.ndarray, settings: SolverSettings) -> np.ndarray:
    z, d = _balance(z)
    return d[:, None] * _sign_iteration(z, settings) / d[None, :]


def _sign_iteration(z: np.ndarray, settings: SolverSettings) -> np.ndarray:
    for _ in range(settings.sign_max_iter):
        try:
            znew = 0.5 * (z + inv(z, settings))
        except SingularMatrix as exc:
            raise NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis") from exc
        if inf_norm(znew - z) < settings.sign_tol * inf_norm(z):
            return znew
        z = znew
    raise NoStabilizingSolution(
        f"matrix sign iteration did not converge in {settings.sign_max_iter} steps"
    )


def solve_care(a, b, q, r, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Stabilizing solution of ``A^T S + S A - S B R^-1 B^T S + Q = 0``.

    The stable invariant subspace of the Hamiltonian is found with the
    matrix sign function, ``S`` is read off it by least squares and then
    polished with Newton-Kleinman steps.

    Raises
    ------
    NoStabilizingSolution
        If the Hamiltonian has imaginary-axis eigenvalues (unstabilizable or
        undetectable data) or the closed loop ``A - B R^-1 B^T S`` is not Hurwitz.
    """
    a = _square(a, "A")
    q = _square(q, "Q")
    r = _square(r, "R")
    b = as_matrix(b, "B")
    n = a.shape[0]
    if b.shape[0] != n:
        b = b.T if b.shape[1] == n else b
    if b.shape[0] != n or q.shape != a.shape or r.shape[0] != b.shape[1]:
        raise ValueError("inconsistent CARE dimensions")
    if cholesky(0.5 * (r + r.T), settings) is None:
        raise ValueError("R must be positive definite")
    r_inv = inv(r, settings)
    g = b @ r_inv @ b.T
    g = 0.5 * (g + g.T)

    # Similarity diag(I, c I) balances the Q and G blocks: sign(H_c) gives S / c.
    gn, qn = inf_norm(g), inf_norm(q)
    c = math.sqrt(qn / gn) if gn > 0 and qn > 0 else 1.0
    ham = np.block([[a, -c * g], [-q / c, -a.T]])
    w = _matrix_sign(ham, settings)
    ident = np.eye(n)
    lhs = np.vstack([w[:n, n:], w[n:, n:] + ident])
    rhs = -np.vstack([w[:n, :n] + ident, w[n:, :n]])
    try:
        s = c * lstsq(lhs, rhs, settings)
    except SingularMatrix as exc:
        raise NoStabilizingSolution("stable subspace is not a graph over the state space") from exc
    s = 0.5 * (s + s.T)

    def newton(s_mat: np.ndarray) -> np.ndarray:
        k = r_inv @ b.T @ s_mat
        try:
            return lyapunov_solve(a - b @ k, q + k.T @ r @ k, settings)
        except SolverFailure as exc:
            raise NoStabilizingSolution("Newton-Kleinman step hit a non-stabilizing gain") from exc

    for _ in range(settings.newton_steps):
        s = newton(s)
    res, scale = care_residual(a, b, q, r, s)
    extra = 0
    while res > settings.care_tol * scale and extra < settings.newton_max_extra:
        s = newton(s)
        res, scale = care_residual(a, b, q, r, s)
        extra += 1
    scaled = res / scale if scale > 0 else res
    _record("care", scaled, settings.care_tol)
    if res > settings.care_tol * scale:
        raise NoStabilizingSolution(f"CARE residual {scaled:.3e} exceeds {settings.care_tol:.0e}")
    if not is_hurwitz(a - g @ s, settings):
        raise NoStabilizingSolution("closed loop A - B R^-1 B^T S is not Hurwitz")
    s = np.array(s)
    s.setflags(write=False)
    return s
