"""Optimal strategies and asymptotic exponents for exponential moments."""

from .altmin import AltMinTrajectory, alt_minimize_multistart, alt_minimize_neg_moment
from .curie_weiss import CWParams, PhasePoint, classify_phase, cw_exponent, magnetization_fixed_points
from .estimators import (
    GaussianLocationFamily,
    TwoPointPrior,
    bayes_linear_fixpoint,
    crb_lower_bound,
    gaussian_sample_mean_moment,
    optimal_code_distribution,
)
from .exponents import (
    LambdaFunctional,
    generic_exponent,
    guessing_exponent_closed,
    lossless_exponent,
    rem_lossy_exponent,
)
from .probability import FiniteDistribution, entropy, kl_divergence, renyi_entropy, tilted_measure
from .strategy_core import (
    FiniteCostTable,
    brute_force_optimum,
    exp_moment,
    gibbs_variational,
    theorem1_certify,
)

__version__ = "0.1.0"
