"""scikit-learn style front end.

``GPLinearFBST`` fits the GP posterior to ``(X, y)`` and runs one FBST of the
configured linear hypothesis. Parameters follow the estimator conventions, so
``get_params``/``set_params``/``clone`` work and the object drops into a
pipeline or a parameter sweep.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import experiment, fbst, gchi2, gp, hypothesis


class GPLinearFBST(RegressorMixin, BaseEstimator):
    """FBST of ``g(x) = b(x) beta`` with a Gaussian process prior on ``g``.

    Parameters
    ----------
    basis : str or LinearBasis, default="intercept+slope"
        Preset name (``"intercept+slope"``, ``"intercept-only"``) or a basis.
    domain : array-like or None, default=None
        Finite covariate domain. ``None`` treats the domain as infinite.
    epsilon : float or None, default=None
        L2 tolerance of the pragmatic hypothesis; ``None`` tests ``H0`` itself.
    measure : str, default="uniform"
        Covariate measure for the pragmatic distance: ``"uniform"`` or
        ``"dp:TAU:LO:HI"`` (see the CLI's ``--measure``).
    prior_mean : float, default=0.0
    kernel : {"exponential", "squared-exponential"}, default="exponential"
    length_scale, amplitude : float, default=1.0
    noise_var : float, default=0.01
    alpha : float, default=0.05

    Attributes
    ----------
    outcome_ : FbstOutcome
    e_value_ : float
    reject_ : bool
    collapsed_ : CollapsedData
    posterior_ : GpPosterior
        Posterior on the finite domain, or on the unique observed rows.
    n_features_in_ : int
    """

    def __init__(self, basis="intercept+slope", domain=None, epsilon=None, measure="uniform",
                 prior_mean=0.0, kernel="exponential", length_scale=1.0, amplitude=1.0,
                 noise_var=0.01, alpha=0.05):
        self.basis = basis
        self.domain = domain
        self.epsilon = epsilon
        self.measure = measure
        self.prior_mean = prior_mean
        self.kernel = kernel
        self.length_scale = length_scale
        self.amplitude = amplitude
        self.noise_var = noise_var
        self.alpha = alpha

    def _prior(self):
        return gp.GpPrior(self.prior_mean, gp.Kernel(self.kernel, self.length_scale,
                                                     self.amplitude), self.noise_var)

    def _basis(self, dim):
        if isinstance(self.basis, hypothesis.LinearBasis):
            return self.basis
        return hypothesis.preset(self.basis, dim)

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_2d=False, y_numeric=True)
        X = gp.as_points(X)
        self.n_features_in_ = X.shape[1]
        self.X_fit_, self.y_fit_ = X, y
        prior = self._prior()
        b = self._basis(X.shape[1])
        data = gp.collapse(X, y)
        self.collapsed_ = data

        if self.domain is not None:
            grid = gp.as_points(check_array(np.asarray(self.domain, dtype=float),
                                            ensure_2d=False))
            post = gp.posterior(prior, X, y, grid)
            self.posterior_ = post
            if self.epsilon is None:
                outcome = fbst.test_linear_finite(post, b, self.alpha)
            else:
                w = experiment.finite_measure(self.measure, grid, X)
                outcome = fbst.test_pragmatic_finite(
                    post, fbst.PragmaticSpec(self.epsilon, w, b), self.alpha)
        else:
            post = gp.posterior(prior, X, y, data.unique_rows)
            self.posterior_ = post
            law = gchi2.quadform_law(post, data)
            if self.epsilon is None:
                outcome = fbst.test_linear_infinite(data, b, post, self.alpha, law)
            else:
                w = experiment.infinite_measure(self.measure, data, X)
                outcome = fbst.test_pragmatic_infinite(
                    data, post, fbst.PragmaticSpec(self.epsilon, w, b), self.alpha, law)

        self.outcome_ = outcome
        self.e_value_ = outcome.e_value
        self.reject_ = outcome.reject
        return self

    def predict(self, X):
        """Posterior mean of ``g`` at ``X``."""
        check_is_fitted(self, "outcome_")
        X = gp.as_points(check_array(X, ensure_2d=False))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return gp.posterior(self._prior(), self.X_fit_, self.y_fit_, X).mean

    def sample_paths(self, X, n_paths=20, seed=0, prior=False):
        """Draw posterior (or prior) sample paths of ``g`` at ``X``."""
        check_is_fitted(self, "outcome_")
        X = gp.as_points(check_array(X, ensure_2d=False))
        if prior:
            law = gp.prior_on(self._prior(), X)
        else:
            law = gp.posterior(self._prior(), self.X_fit_, self.y_fit_, X)
        return gp.draw_paths(law, n_paths, seed)
