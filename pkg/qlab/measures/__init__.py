from .base import LevyMeasure
from .continuous import BilateralExponential, ContinuousMeasure, DensityTable
from .discrete import Atoms, Mixture
from .operations import (
    apply_generator_convolution,
    apply_generator_direct,
    centering_gamma,
    is_unimodal,
    jump_cdf,
    kernel_k,
    mass_between,
    measure_to_dict,
    mu_tails,
    parse_measure,
    sample_jump,
    sample_jumps,
    split_measure,
    total_mass,
)

__all__ = [
    "LevyMeasure",
    "ContinuousMeasure",
    "BilateralExponential",
    "DensityTable",
    "Atoms",
    "Mixture",
    "total_mass",
    "centering_gamma",
    "mu_tails",
    "kernel_k",
    "apply_generator_direct",
    "apply_generator_convolution",
    "is_unimodal",
    "sample_jump",
    "sample_jumps",
    "jump_cdf",
    "split_measure",
    "mass_between",
    "parse_measure",
    "measure_to_dict",
]
