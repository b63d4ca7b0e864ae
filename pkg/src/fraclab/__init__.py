"""Desk-scale numerics for fractional Laplacians: heat-semigroup and Fourier forms,
the function F(z) and its poles, spherical means, and exterior inverse problems."""

from .grid import DecayCertificate, Field, GridSpec, frac_lap_fourier, laplacian_power
from .regions import Ball, Box, RegionSpec
from .exponents import ExponentConfig, HypothesisViolation, validate_alphas, validate_exponents
from .analytic import parse_descriptor, sample_analytic
from .heat import TimeQuadrature, frac_lap_heat, heat_evolve, mellin_G
from .fz import FScenario, F_mero, F_right, moment_direct, poles_of, residue_moment
from .spherical import build_profile, certify_norm, support_decision
from .pipeline import demonstrate_H_necessity, reduce_to_smooth, run_pipeline
from .calderon import (ExteriorProblem, aniso_symbol_extract, dn_apply, dn_matrix, reconstruct_q,
                       runge_approximate, solve_exterior)

__version__ = "0.1.0"
