"""Local likelihood smoothing with Bregman-divergence prediction error.

The package fits local polynomial likelihood estimates for exponential
family responses (Gaussian, Poisson, Bernoulli), estimates their
prediction error under any Bregman divergence by exact or approximate
leave-one-out cross-validation, and selects the bandwidth.  Univariate,
varying-coefficient and partially linear models are covered, together
with the asymptotically optimal bandwidths and a simulation harness.
"""

__version__ = "0.1.0"

from .exceptions import *  # noqa: E402,F401,F403
from .family import *  # noqa: E402,F401,F403
from .divergence import *  # noqa: E402,F401,F403
from .kernelmath import *  # noqa: E402,F401,F403
from .locfit import *  # noqa: E402,F401,F403
from .loocv import *  # noqa: E402,F401,F403
from .varcoef import *  # noqa: E402,F401,F403
from .semipar import *  # noqa: E402,F401,F403
from .asymptotic import *  # noqa: E402,F401,F403
from .simlab import *  # noqa: E402,F401,F403
