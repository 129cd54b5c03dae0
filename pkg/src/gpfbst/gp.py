"""Gaussian process prior, conjugate posterior and repeated-row collapse.

Covariate points are handled as 2-D arrays of shape ``(n, d)``; 1-D inputs
are read as ``d = 1``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from . import numerics
from .exceptions import DimensionMismatch

KERNEL_VARIANTS = ("exponential", "squared-exponential")


def as_points(x):
    """Coerce covariate points to a float array of shape ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None]
    elif x.ndim != 2:
        raise ValueError(f"points must be 1-D or 2-D, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


@dataclass(frozen=True)
class Kernel:
    """Stationary covariance function.

    ``exponential``: ``amplitude * exp(-|a - b| / (2 * length_scale))``, so the
    default ``length_scale=1`` gives ``exp(-|a - b| / 2)``.

    ``squared-exponential``: ``amplitude * exp(-|a - b|**2 / (2 * length_scale**2))``.
    """

    variant: str = "exponential"
    length_scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")

    def __call__(self, a, b=None):
        return kernel_matrix(self, a, a if b is None else b)


def kernel_matrix(kernel: Kernel, a, b):
    """Evaluate ``K(a, b)`` entrywise."""
    a, b = as_points(a), as_points(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"point dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    if kernel.variant == "exponential":
        dist = cdist(a, b, "euclidean")
        return kernel.amplitude * np.exp(-dist / (2.0 * kernel.length_scale))
    sq = cdist(a, b, "sqeuclidean")
    return kernel.amplitude * np.exp(-sq / (2.0 * kernel.length_scale**2))


MeanFn = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class GpPrior:
    mean_fn: MeanFn = 0.0
    kernel: Kernel = field(default_factory=Kernel)
    noise_var: float = 0.01

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    def mean(self, x):
        x = as_points(x)
        if callable(self.mean_fn):
            return np.asarray(self.mean_fn(x), dtype=float).reshape(len(x))
        return np.full(len(x), float(self.mean_fn))


@dataclass(frozen=True)
class GpPosterior:
    """Joint normal law of ``g`` on a finite grid."""

    grid: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        for name, arr in (("grid", np.array(as_points(self.grid))),
                          ("mean", np.array(self.mean, dtype=float)),
                          ("cov", np.array(self.cov, dtype=float))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.grid)
        if self.mean.shape != (n,) or self.cov.shape != (n, n):
            raise DimensionMismatch("posterior mean/cov do not match grid length")


def prior_on(prior: GpPrior, grid):
    """The prior itself, packaged as a :class:`GpPosterior` on ``grid``."""
    grid = as_points(grid)
    return GpPosterior(grid.copy(), prior.mean(grid), kernel_matrix(prior.kernel, grid, grid))


def posterior(prior: GpPrior, x_obs, y_obs, grid):
    """Conjugate GP posterior evaluated on ``grid``.

    Parameters
    ----------
    prior : GpPrior
    x_obs : array-like, shape (n,) or (n, d)
    y_obs : array-like, shape (n,)
    grid : array-like, shape (m,) or (m, d)

    Returns
    -------
    GpPosterior
    """
    x_obs, grid = as_points(x_obs), as_points(grid)
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    if len(x_obs) != len(y_obs):
        raise DimensionMismatch(f"{len(x_obs)} covariate rows but {len(y_obs)} responses")
    if len(y_obs) == 0 or len(grid) == 0:
        raise ValueError("need at least one observation and one grid point")

    k_xx = kernel_matrix(prior.kernel, x_obs, x_obs)
    k_xg = kernel_matrix(prior.kernel, x_obs, grid)
    k_gg = kernel_matrix(prior.kernel, grid, grid)
    factor, jitter = numerics.cholesky_jittered(k_xx + prior.noise_var * np.eye(len(x_obs)))

    resid = y_obs - prior.mean(x_obs)
    alpha = scipy.linalg.cho_solve((factor, True), resid)
    mean = prior.mean(grid) + k_xg.T @ alpha
    v = scipy.linalg.solve_triangular(factor, k_xg, lower=True)
    cov = k_gg - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return GpPosterior(grid.copy(), mean, cov, jitter)


def draw_paths(post: GpPosterior, count: int, seed: int):
    """Draw ``count`` sample paths of ``N(post.mean, post.cov)``.

    Uses a symmetric eigen square root, so singular (PSD) covariances are
    fine. Returns an array of shape ``(count, len(post.grid))``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    values, vectors = numerics.sym_eigen(post.cov)
    root = vectors * np.sqrt(np.clip(values, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, len(values)))
    return post.mean + z @ root.T


@dataclass(frozen=True)
class CollapsedData:
    """Unique covariate rows with multiplicities and group means.

    ``within_ss`` is the pooled within-group sum of squares, i.e. the part of
    the full residual sum of squares that no regression function can touch.
    """

    unique_rows: np.ndarray
    counts: np.ndarray
    group_means: np.ndarray
    within_ss: float

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def n_unique(self):
        return len(self.counts)

    @property
    def count_matrix(self):
        return np.diag(self.counts.astype(float))


def collapse(x_obs, y_obs):
    """Group exact repeats of covariate rows, keeping first-appearance order."""
    x_obs = as_points(x_obs)
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    if len(x_obs) != len(y_obs):
        raise DimensionMismatch(f"{len(x_obs)} covariate rows but {len(y_obs)} responses")

    index = {}
    labels = np.empty(len(x_obs), dtype=int)
    for i, row in enumerate(x_obs):
        key = tuple(row.tolist())
        labels[i] = index.setdefault(key, len(index))
    first = np.array([np.argmax(labels == j) for j in range(len(index))], dtype=int)

    counts = np.bincount(labels, minlength=len(index))
    sums = np.bincount(labels, weights=y_obs, minlength=len(index))
    means = sums / counts
    within = float(np.sum((y_obs - means[labels]) ** 2))
    return CollapsedData(x_obs[first].copy(), counts, means, within)


def wrss(h_values, data: CollapsedData):
    """Weighted residual sum of squares ``(h - ybar)' D (h - ybar)``."""
    h_values = np.asarray(h_values, dtype=float).ravel()
    if h_values.shape != data.group_means.shape:
        raise DimensionMismatch(
            f"expected {data.n_unique} values on the unique rows, got {h_values.size}"
        )
    r = h_values - data.group_means
    return float(np.sum(data.counts * r * r))


def posterior_on_unique(prior: GpPrior, x_obs, y_obs, data: Optional[CollapsedData] = None):
    """Posterior evaluated on the unique observed rows, in collapse order."""
    if data is None:
        data = collapse(x_obs, y_obs)
    return posterior(prior, x_obs, y_obs, data.unique_rows)
