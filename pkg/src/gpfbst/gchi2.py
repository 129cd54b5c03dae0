"""Generalized chi-squared law of Gaussian quadratic forms.

A :class:`QuadFormDist` is the law of ``offset + sum_i w_i * chi2_1(nc_i)`` with
all weights strictly positive. The CDF is computed by inverting the
characteristic function with Imhof's integral; the oscillatory tail is handled
with QUADPACK's Fourier-integral routine (QAWF), and far tails are settled with
a Chernoff bound before any integration is attempted.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize

from . import numerics
from .exceptions import DimensionMismatch, IntegrationFailure, NumericalFailure
from .gp import CollapsedData, GpPosterior

logger = logging.getLogger(__name__)

ZERO_WEIGHT_RTOL = 1e-10
NEGATIVE_WEIGHT_RTOL = 1e-9
CDF_ABS_TOL = 1e-6
TAIL_BOUND = 1e-13


@dataclass(frozen=True)
class QuadFormDist:
    weights: np.ndarray
    noncentralities: np.ndarray
    offset: float = 0.0
    origin_note: str = ""

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        nc = np.atleast_1d(np.asarray(self.noncentralities, dtype=float))
        if w.shape != nc.shape:
            raise DimensionMismatch("weights and noncentralities differ in length")
        if np.any(w < 0) or np.any(nc < 0):
            raise ValueError("weights and noncentralities must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "noncentralities", nc)

    @classmethod
    def from_arrays(cls, weights, noncentralities=None, offset=0.0, origin_note=""):
        """Build a law, moving zero weights into the constant offset.

        A zero weight contributes nothing random; its noncentrality is then
        meaningless and is dropped.
        """
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        nc = np.zeros_like(w) if noncentralities is None else np.atleast_1d(
            np.asarray(noncentralities, dtype=float))
        keep = w > 0
        return cls(w[keep], nc[keep], float(offset), origin_note)

    @property
    def mean(self):
        return self.offset + float(np.sum(self.weights * (1.0 + self.noncentralities)))

    @property
    def var(self):
        return float(2.0 * np.sum(self.weights**2 * (1.0 + 2.0 * self.noncentralities)))

    def cdf(self, x):
        return cdf(self, x)

    def sf(self, x):
        return sf(self, x)

    def quantile(self, p):
        return quantile(self, p)


def quadform_law(post: GpPosterior, data: CollapsedData):
    """Law of ``WRSS(g)`` when ``g`` on the unique rows follows ``post``.

    With ``a = D^{1/2} (mu - ybar)`` and ``D^{1/2} Sigma D^{1/2} = V diag(lam) V'``,
    ``WRSS(g) = sum_i lam_i * chi2_1((v_i'a)^2 / lam_i)``. Directions whose
    eigenvalue is numerically zero contribute the constant ``(v_i'a)^2``.
    """
    if post.grid.shape != data.unique_rows.shape or not np.array_equal(
            post.grid, data.unique_rows):
        raise DimensionMismatch("posterior grid must equal the unique rows, in order")

    root_d = np.sqrt(data.counts.astype(float))
    s = root_d[:, None] * post.cov * root_d[None, :]
    shift = root_d * (post.mean - data.group_means)
    values, vectors = numerics.sym_eigen(s)
    lam_max = max(values[0], 0.0)
    if values[-1] < -NEGATIVE_WEIGHT_RTOL * lam_max:
        raise NumericalFailure(
            f"covariance has a negative eigenvalue {values[-1]:.3g} (max {lam_max:.3g})")
    if values[-1] < 0:
        logger.warning("clamping negative eigenvalue %.3g to zero", values[-1])
        values = np.clip(values, 0.0, None)

    proj = vectors.T @ shift
    random = values > ZERO_WEIGHT_RTOL * lam_max
    offset = float(np.sum(proj[~random] ** 2))
    weights = values[random]
    nc = proj[random] ** 2 / weights
    note = f"WRSS law on {data.n_unique} unique rows (n={data.n})"
    return QuadFormDist(weights, nc, offset, note)


def _log_mgf(d, t):
    # log E exp(t * (Q - offset)), valid for t < 1 / (2 * max weight)
    a = 1.0 - 2.0 * d.weights * t
    return float(np.sum(-0.5 * np.log(a) + d.noncentralities * d.weights * t / a))


def _chernoff(d, y, upper):
    """Chernoff bound on P(Q - offset > y) (upper) or P(Q - offset <= y)."""
    if upper:
        t_max = 0.5 / d.weights.max()
        res = scipy.optimize.minimize_scalar(
            lambda t: _log_mgf(d, t) - t * y, bounds=(0.0, t_max * (1 - 1e-9)),
            method="bounded", options={"xatol": t_max * 1e-9})
    else:
        t_hi = 1e3 * d.weights.size / max(y, 1e-300)
        res = scipy.optimize.minimize_scalar(
            lambda t: _log_mgf(d, -t) + t * y, bounds=(0.0, t_hi),
            method="bounded", options={"xatol": t_hi * 1e-12})
    return float(np.exp(min(res.fun, 0.0)))


def _imhof_integral(w, nc, y):
    """``int_0^inf sin(theta(u)) / (u rho(u)) du`` for positive weights ``w``."""
    omega = 0.5 * y

    def phase(u):
        lu = w * u
        return 0.5 * np.sum(np.arctan(lu) + nc * lu / (1.0 + lu * lu))

    def rho(u):
        lu2 = (w * u) ** 2
        return np.exp(np.sum(0.25 * np.log1p(lu2) + 0.5 * nc * lu2 / (1.0 + lu2)))

    def full(u):
        if u == 0.0:
            return 0.5 * np.sum(w * (1.0 + nc)) - omega
        return np.sin(phase(u) - omega * u) / (u * rho(u))

    def cos_part(u):
        return np.sin(phase(u)) / (u * rho(u))

    def sin_part(u):
        return np.cos(phase(u)) / (u * rho(u))

    split = min(4.0 * np.pi / omega, 50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            head, e0 = scipy.integrate.quad(full, 0.0, split, epsabs=1e-11, epsrel=1e-10,
                                            limit=1000)
            tail_c, e1 = scipy.integrate.quad(cos_part, split, np.inf, weight="cos",
                                              wvar=omega, epsabs=1e-11, limlst=200,
                                              limit=1000)
            tail_s, e2 = scipy.integrate.quad(sin_part, split, np.inf, weight="sin",
                                              wvar=omega, epsabs=1e-11, limlst=200,
                                              limit=1000)
        except scipy.integrate.IntegrationWarning as exc:
            raise IntegrationFailure(str(exc)) from exc
    err = e0 + e1 + e2
    if err > np.pi * CDF_ABS_TOL:
        raise IntegrationFailure(f"integration error estimate {err:.3g} too large")
    return head + tail_c - tail_s


def _upper_tail(d, x):
    # returns (cdf, sf) pair computed without cancellation where possible
    y = float(x) - d.offset
    if d.weights.size == 0:
        return (1.0, 0.0) if y >= 0 else (0.0, 1.0)
    if y <= 0:
        return 0.0, 1.0
    scale = d.weights.max()
    w, ys = d.weights / scale, y / scale
    dn = QuadFormDist(w, d.noncentralities)
    if ys > dn.mean and _chernoff(dn, ys, upper=True) < TAIL_BOUND:
        return 1.0, 0.0
    if ys < dn.mean and _chernoff(dn, ys, upper=False) < TAIL_BOUND:
        return 0.0, 1.0
    integral = _imhof_integral(w, d.noncentralities, ys) / np.pi
    lower = float(np.clip(0.5 - integral, 0.0, 1.0))
    upper = float(np.clip(0.5 + integral, 0.0, 1.0))
    return lower, upper


def cdf(d: QuadFormDist, x):
    """``P(Q <= x)``, absolute error target 1e-6."""
    return _upper_tail(d, x)[0]


def sf(d: QuadFormDist, x):
    """``P(Q > x)``."""
    return _upper_tail(d, x)[1]


def quantile(d: QuadFormDist, p):
    """Smallest ``x`` with ``cdf(x) = p``, bracketed in ``[offset, mean + 12 sd]``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if d.weights.size == 0:
        return d.offset
    lo = d.offset
    hi = d.mean + 12.0 * np.sqrt(d.var)
    while cdf(d, hi) < p:
        hi = d.offset + 2.0 * (hi - d.offset)
    tol = 1e-12 * (hi - lo)
    return numerics.find_root(lambda x: cdf(d, x) - p, lo, hi, tol=tol, method="brentq")


def sample(d: QuadFormDist, size, seed):
    """Draw ``size`` variates of the quadratic form."""
    rng = np.random.default_rng(seed)
    out = np.full(size, d.offset)
    shifts = np.sqrt(d.noncentralities)
    chunk = max(1, 2_000_000 // max(d.weights.size, 1))
    for start in range(0, size, chunk):
        stop = min(start + chunk, size)
        z = rng.standard_normal((stop - start, d.weights.size))
        out[start:stop] += ((z + shifts) ** 2) @ d.weights
    return out


def cdf_mc(d: QuadFormDist, x, samples=1_000_000, seed=0):
    """Monte Carlo estimate of ``P(Q <= x)`` and its standard error."""
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    p = float(np.mean(sample(d, samples, seed) <= x))
    return p, float(np.sqrt(p * (1.0 - p) / samples))
