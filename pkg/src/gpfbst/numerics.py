"""Dense symmetric linear algebra and scalar root finding.

Thin wrappers over LAPACK (via :mod:`scipy.linalg`) that translate failures
into the package exceptions and fix the tolerances used everywhere else.
"""

from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .exceptions import NoBracket, NoConvergence, NotPositiveDefinite

PINV_RTOL = 1e-10
ROOT_TOL = 1e-10
JITTER_START = 1e-10
JITTER_ESCALATIONS = 3


class EigenDecomp(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def as_symmetric(a, name="matrix"):
    """Return ``a`` as a float array, checking squareness and symmetry."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def cholesky(a):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    a = as_symmetric(a)
    try:
        return scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def cholesky_jittered(a):
    """Cholesky with escalating diagonal jitter.

    The first retry adds ``1e-10 * trace / dim`` to the diagonal; each of the
    following escalations multiplies the jitter by 10.

    Returns
    -------
    factor : ndarray
        Lower triangular factor of ``a + jitter * I``.
    jitter : float
        The jitter actually added (0.0 if none was needed).
    """
    a = as_symmetric(a)
    try:
        return cholesky(a), 0.0
    except NotPositiveDefinite:
        pass
    n = a.shape[0]
    jitter = JITTER_START * max(np.trace(a) / n, np.finfo(float).tiny)
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            return cholesky(a + jitter * np.eye(n)), jitter
        except NotPositiveDefinite:
            jitter *= 10.0
    raise NotPositiveDefinite(
        f"matrix not positive definite after jitter up to {jitter / 10.0:.3g}"
    )


def solve_spd(a, rhs):
    """Solve ``a @ x = rhs`` for symmetric positive definite ``a``."""
    factor = cholesky(a)
    return scipy.linalg.cho_solve((factor, True), np.asarray(rhs, dtype=float))


def sym_eigen(a):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = as_symmetric(a)
    try:
        values, vectors = scipy.linalg.eigh(a, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return EigenDecomp(values[::-1].copy(), vectors[:, ::-1].copy())


def pinv(a, tol=PINV_RTOL):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with magnitude below ``tol * max|eigenvalue|`` are treated as
    exact zeros.
    """
    values, vectors = sym_eigen(a)
    if values.size == 0:
        return np.zeros((0, 0))
    cutoff = tol * np.abs(values).max(initial=0.0)
    keep = np.abs(values) > cutoff
    inv = np.zeros_like(values)
    inv[keep] = 1.0 / values[keep]
    out = (vectors * inv) @ vectors.T
    return 0.5 * (out + out.T)


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = ROOT_TOL,
              method: str = "bisect"):
    """Bracketed root of a continuous scalar function on ``[lo, hi]``.

    ``method`` is ``"bisect"`` or ``"brentq"`` (bisection safeguarded by
    inverse quadratic steps; far fewer evaluations for smooth ``f``).

    Raises
    ------
    NoBracket
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"f({lo})={flo:.3g} and f({hi})={fhi:.3g} have the same sign")
    solver = {"bisect": scipy.optimize.bisect, "brentq": scipy.optimize.brentq}[method]
    return float(solver(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=2000))
