"""Numerical laboratory for spectral gaps of log-concave measures."""

from .measures import (
    MeasureSpec, PerturbationSpec, Density, Gaussian, LaplaceFamily, NuP,
    UniformInterval, UniformBody, NuNQ, Product, Perturbed, lp_ball,
    build_measure, exact_poincare, expectation, integrate, alpha_p,
)

__version__ = "0.1.0"
