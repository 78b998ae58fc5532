"""Posterior construction, MCMC sampling and posterior summaries."""

from .diagnostics import Diagnostics, diagnose, ess_bulk, ess_tail, split_rhat
from .draws import PosteriorDraws, fit, seed_r0_correlation
from .model import EpidemicModel, LatentSpec
from .sampler import ChainSamples, DivergenceWarning, SamplerConfig, sample
from .summary import QuantitySummary, forecast, series_rows, summarize, summarize_quantities
from .waic import WAIC, compare, elpd_difference, waic

__all__ = [
    "ChainSamples",
    "Diagnostics",
    "DivergenceWarning",
    "EpidemicModel",
    "LatentSpec",
    "PosteriorDraws",
    "QuantitySummary",
    "SamplerConfig",
    "WAIC",
    "compare",
    "diagnose",
    "elpd_difference",
    "ess_bulk",
    "ess_tail",
    "fit",
    "forecast",
    "sample",
    "seed_r0_correlation",
    "series_rows",
    "split_rhat",
    "summarize",
    "summarize_quantities",
    "waic",
]
