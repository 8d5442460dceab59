"""Pseudo-spectral laboratory for fractional-to-classical diffusion limits
of quadratic parabolic systems on the periodic torus."""

__version__ = "0.1.0"

from .convergence import RateStudyConfig, run_rate_study
from .kernels import kernel_rate_check
from .solver import SolverConfig, etd_march, picard_solve, solve
from .spectral import FourierGrid, SpectralField, forward_transform, inverse_transform
from .system import SystemSpec, build_preset

__all__ = [
    "FourierGrid",
    "RateStudyConfig",
    "SolverConfig",
    "SpectralField",
    "SystemSpec",
    "build_preset",
    "etd_march",
    "forward_transform",
    "inverse_transform",
    "kernel_rate_check",
    "picard_solve",
    "run_rate_study",
    "solve",
]
