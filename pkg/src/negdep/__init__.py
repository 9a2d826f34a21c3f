"""Negative dependence toolkit: exact NA and strong Rayleigh checks for small
Bernoulli laws, Gaussian threshold laws, covariance diagnostics and
stochastic-covering couplings."""
__version__ = "0.1.0"

from negdep.model import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    BernoulliLaw,
    GaussianSpec,
    MultiaffinePoly,
    Verdict,
    covariance_matrix,
    generating_polynomial,
    law_from_json,
    law_from_pmf,
    marginal,
)
from negdep.na import check_na_exact, check_negative_correlation, enumerate_upsets
from negdep.stable import (
    Budget,
    check_stable_bivariate,
    check_stable_numeric,
    check_strongly_rayleigh,
    sr_necessary_conditions,
)
from negdep.gaussian import (
    bivariate_threshold_cov,
    canonical_correlation,
    gaussian_na_check,
    max_linear_correlation,
    orthant_probability,
    tail_projection_profile,
    threshold_covariance,
    threshold_law,
)
from negdep.diagnostics import (
    CovProfile,
    check_pairwise_sum_bound,
    check_row_sum_bound,
    classify_growth,
    decorrelation_bound,
    max_event_covariance,
    row_sum_profile,
    stationary_row_bound_check,
)
from negdep.coupling import CoveringCoupling, conditional_law, covering_feasible, scp_check
