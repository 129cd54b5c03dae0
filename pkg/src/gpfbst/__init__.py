"""Full Bayesian Significance Tests of linear models under Gaussian process priors."""

__version__ = "0.1.0"

from .exceptions import FbstError  # noqa: E402
from .fbst import FbstOutcome, PragmaticSpec  # noqa: E402
from .gp import GpPrior, Kernel  # noqa: E402
from .estimator import GPLinearFBST  # noqa: E402

__all__ = ["FbstError", "FbstOutcome", "GPLinearFBST", "GpPrior", "Kernel", "PragmaticSpec",
           "__version__"]
