"""Linear-model hypotheses and their projection matrices.

``H0: g(x) = b(x) beta`` for a basis ``b`` of ``k`` functions. The unweighted
residual projector ``M`` and the measure-weighted residual form ``N`` both
live here, together with the L2 projection of a function onto the basis.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import RankDeficient
from .gp import as_points
from .measure import CovariateMeasure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearBasis:
    """Basis functions evaluated row-wise.

    ``eval`` maps an ``(n, d)`` array of points to an ``(n, k)`` design matrix
    and must be deterministic.
    """

    k: int
    eval: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __call__(self, points):
        return design_matrix(self, points)


def intercept_only():
    return LinearBasis(1, lambda x: np.ones((len(x), 1)), "intercept-only")


def intercept_slope(dim=1):
    """Intercept plus one slope per covariate column."""
    return LinearBasis(1 + dim, lambda x: np.column_stack([np.ones(len(x)), x]),
                       "intercept+slope")


def tabulated(points, columns, name="tabulated"):
    """Basis given by its values on a finite set of points.

    Evaluating at a point that is not in the table raises ``KeyError``.
    """
    points = as_points(points)
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    if len(points) != len(columns):
        raise ValueError("one row of basis values per point required")
    table = {tuple(r): c for r, c in zip(points.tolist(), columns)}

    def evaluate(x):
        try:
            return np.array([table[tuple(r)] for r in x.tolist()])
        except KeyError as exc:
            raise KeyError(f"basis {name!r} is not tabulated at {exc.args[0]}") from exc

    return LinearBasis(columns.shape[1], evaluate, name)


def reparameterized(basis: LinearBasis, t):
    """The basis ``b(x) @ t`` for an invertible ``k x k`` matrix ``t``."""
    t = np.asarray(t, dtype=float)
    return LinearBasis(basis.k, lambda x: basis.eval(x) @ t, f"{basis.name}@T")


PRESETS = {"intercept-only": intercept_only, "intercept+slope": intercept_slope}


def preset(name, dim=1):
    if name == "intercept-only":
        return intercept_only()
    if name == "intercept+slope":
        return intercept_slope(dim)
    raise KeyError(f"unknown basis preset {name!r}; choose from {sorted(PRESETS)}")


def design_matrix(b: LinearBasis, points):
    points = as_points(points)
    if len(points) == 0:
        raise ValueError("points must be nonempty")
    out = np.asarray(b.eval(points), dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if out.shape != (len(points), b.k):
        raise ValueError(f"basis {b.name!r} returned shape {out.shape}, "
                         f"expected {(len(points), b.k)}")
    return out


def _check_rank(gram, k, what):
    if np.linalg.matrix_rank(gram, tol=1e-12 * max(np.abs(gram).max(), 1e-300)) < k:
        raise RankDeficient(f"{what} has rank < {k}")


@dataclass(frozen=True)
class ProjectionPair:
    matrix: np.ndarray
    kind: str
    basis: LinearBasis
    points: np.ndarray


def projection_m(b: LinearBasis, points):
    """Residual projector ``I - B (B'B)^{-1} B'``."""
    design = design_matrix(b, points)
    n, k = design.shape
    if n < k:
        raise RankDeficient(f"{n} points cannot support {k} basis functions")
    q, r = np.linalg.qr(design)
    if np.abs(np.diag(r)).min() <= 1e-12 * np.abs(np.diag(r)).max():
        raise RankDeficient(f"design matrix of basis {b.name!r} is rank deficient")
    m = np.eye(n) - q @ q.T
    return ProjectionPair(0.5 * (m + m.T), "unweighted-M", b, as_points(points))


def _drop_zero_weight(points, weights):
    points = as_points(points)
    keep = weights > 0
    if not np.all(keep):
        logger.info("dropping %d zero-weight atoms", int((~keep).sum()))
    return points[keep], weights[keep], keep


def projection_n(b: LinearBasis, points, w: CovariateMeasure):
    """Weighted residual form ``D_P [I - B (B' D_P B)^{-1} B' D_P]``.

    ``h' N h`` is the squared L2 distance (under ``w``'s atom weights) from
    ``h`` to the span of the basis. Zero-weight points are dropped, so the
    matrix is indexed by the points with positive weight only.
    """
    pts, p, _ = _drop_zero_weight(points, w.weights_at(points))
    design = design_matrix(b, pts)
    gram = design.T @ (p[:, None] * design)
    _check_rank(gram, b.k, "weighted Gram matrix")
    dp_b = p[:, None] * design
    hat = dp_b @ scipy.linalg.solve(gram, dp_b.T, assume_a="pos")
    n_mat = np.diag(p) - hat
    return ProjectionPair(0.5 * (n_mat + n_mat.T), "weighted-N", b, pts)


def lemma1_project(h_values, b: LinearBasis, w: CovariateMeasure, points=None):
    """L2 projection of ``h`` onto the basis under the measure's atoms.

    Parameters
    ----------
    h_values : array-like
        Values of ``h`` on ``points`` (defaults to the measure's atoms).
    b : LinearBasis
    w : CovariateMeasure

    Returns
    -------
    beta_tilde : ndarray, shape (k,)
        Solution of ``A_b beta = h_b`` with ``A_b = E[b b']`` and ``h_b = E[h b]``.
    distance : float
        ``sqrt(E[(h - b beta_tilde)^2])``.
    """
    points = w.atoms if points is None else as_points(points)
    h = np.asarray(h_values, dtype=float).ravel()
    if len(h) != len(points):
        raise ValueError("one value of h per point required")
    p = w.weights_at(points)
    keep = p > 0
    design = design_matrix(b, points[keep])
    p, h = p[keep], h[keep]
    a_b = design.T @ (p[:, None] * design)
    _check_rank(a_b, b.k, "basis second-moment matrix")
    h_b = design.T @ (p * h)
    beta = scipy.linalg.solve(a_b, h_b, assume_a="pos")
    resid = h - design @ beta
    return beta, float(np.sqrt(np.sum(p * resid * resid)))
