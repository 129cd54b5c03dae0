"""Probability measures over covariate points.

All downstream matrices use only the atoms. A Dirichlet-process predictive
with a continuous base keeps its base mass as metadata (``remainder_mass``).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DuplicateAtoms
from .gp import as_points


@dataclass(frozen=True)
class CovariateMeasure:
    atoms: np.ndarray
    weights: np.ndarray
    source: str = "explicit-pmf"
    remainder_mass: float = 0.0

    def __post_init__(self):
        atoms = np.array(as_points(self.atoms))
        weights = np.array(self.weights, dtype=float).ravel()
        if len(atoms) != len(weights):
            raise ValueError("one weight per atom required")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if weights.sum() > 1.0 + 1e-12:
            raise ValueError(f"atom mass {weights.sum():.6g} exceeds 1")
        if len({tuple(r) for r in atoms.tolist()}) != len(atoms):
            raise DuplicateAtoms("atoms must be distinct")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def total_atom_mass(self):
        return float(self.weights.sum())

    def weights_at(self, points):
        """Weight of each point in ``points``; 0 for points that are not atoms."""
        lookup = {tuple(r): w for r, w in zip(self.atoms.tolist(), self.weights)}
        return np.array([lookup.get(tuple(r), 0.0) for r in as_points(points).tolist()])


def finite_uniform(domain):
    """Uniform pmf on a finite set of distinct points."""
    domain = as_points(domain)
    if len(domain) == 0:
        raise ValueError("domain must be nonempty")
    return CovariateMeasure(domain, np.full(len(domain), 1.0 / len(domain)), "finite-uniform")


def explicit_pmf(atoms, weights):
    return CovariateMeasure(atoms, weights, "explicit-pmf")


def dp_predictive(tau, x_obs, base_is_continuous=True, base_label="continuous",
                  base_atoms=None):
    """Predictive law of a new covariate under a DP(tau, base) posterior.

    Each distinct observed point gets ``count / (tau + n)``. With a continuous
    base the remaining ``tau / (tau + n)`` carries no atoms and is kept in
    ``remainder_mass``. A discrete base is taken as uniform on ``base_atoms``
    (default: the distinct observed points) and its mass is added there.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    x_obs = as_points(x_obs)
    n = len(x_obs)
    if n == 0:
        raise ValueError("x_obs must be nonempty")
    mass = {}
    for row in x_obs.tolist():
        mass[tuple(row)] = mass.get(tuple(row), 0.0) + 1.0 / (tau + n)
    remainder = tau / (tau + n)
    if not base_is_continuous:
        base = list(mass) if base_atoms is None else [tuple(r) for r in
                                                      as_points(base_atoms).tolist()]
        if len(set(base)) != len(base):
            raise DuplicateAtoms("base atoms must be distinct")
        for key in base:
            mass[key] = mass.get(key, 0.0) + remainder / len(base)
        remainder = 0.0
    atoms = np.array(list(mass), dtype=float)
    weights = np.array(list(mass.values()))
    return CovariateMeasure(atoms, weights,
                            f"dp-predictive(tau={tau:g}, base={base_label}, n={n})", remainder)


def check_support(w: CovariateMeasure, required):
    """True iff every required point carries positive weight."""
    required = np.asarray(required, dtype=float)
    if required.size == 0:
        return True
    return bool(np.all(w.weights_at(required) > 0))
