"""Tail probabilities of the maximal strain in a 1D elliptic problem with a log-normal coefficient."""

from .asymptotics import ApproxReport, approximate_tail, dominant_location, location_ratio_r
from .kernel import check_assumptions, custom_kernel, spectral_moments, squared_exponential
from .rare_event import compare, location_histogram, mc_direct, mc_tilted
from .solver import ProblemSpec, constant_forcing, cosine_bump, gaussian_bump, max_abs_strain

__all__ = [
    "ApproxReport",
    "ProblemSpec",
    "approximate_tail",
    "check_assumptions",
    "compare",
    "constant_forcing",
    "cosine_bump",
    "custom_kernel",
    "dominant_location",
    "gaussian_bump",
    "location_histogram",
    "location_ratio_r",
    "max_abs_strain",
    "mc_direct",
    "mc_tilted",
    "spectral_moments",
    "squared_exponential",
]
