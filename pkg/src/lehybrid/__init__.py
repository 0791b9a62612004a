"""Inference for the logistic-exponential lifetime model under progressive
type-I hybrid censoring: likelihood fitting, Lindley and importance-sampling
Bayes estimates, Monte Carlo studies and goodness-of-fit tools."""

__version__ = "0.1.0"

from .bayes import SQ, LossSpec, PriorSpec, parse_loss
from .censor import (
    CensoredSample,
    CensoringScheme,
    complete_sample,
    generate_sample,
    observed_sample,
    parse_scheme,
)
from .dist import Family, Params, le_cdf, le_logpdf, le_pdf, le_quantile, le_sf
from .errors import *  # noqa: F401,F403
from .gof import FitSummary, fit_family
from .importance import WeightedDraws, hpd_interval, is_draws, is_estimate
from .lik import deriv_bundle, loglik, score
from .lindley import lindley_estimate, lindley_report
from .mle import MleFit, fit_mle, na_interval, nl_interval, profile_loglik
