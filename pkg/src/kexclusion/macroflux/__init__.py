"""Macroscopic layer: fluxes, conjugates and the Hopf-Lax solution."""

from __future__ import annotations

from .flux import (
    ConjugateG,
    FluxFunction,
    PiecewiseLinear,
    conjugate,
    corner_flux,
    flux_bounds_k,
    flux_from_g,
    one_sided_derivatives,
)
from .hopflax import (
    CurrentComparison,
    DensityResult,
    HopfLaxField,
    current_compare,
    profile_antiderivative,
    riemann_solution,
    standing_shock,
)

__all__ = [
    "ConjugateG",
    "CurrentComparison",
    "DensityResult",
    "FluxFunction",
    "HopfLaxField",
    "PiecewiseLinear",
    "conjugate",
    "corner_flux",
    "current_compare",
    "flux_bounds_k",
    "flux_from_g",
    "one_sided_derivatives",
    "profile_antiderivative",
    "riemann_solution",
    "standing_shock",
]
