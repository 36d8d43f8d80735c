"""Monotone finite-difference solvers for degenerate parabolic and elliptic
problems on periodic grids, with expansion in the mesh size and Richardson
extrapolation."""

from .elliptic import EllipticProblem, IterationConfig, contraction_factor, fixed_point_iterate, solve_elliptic
from .expansion import (BELOW_FLOOR, expansion_remainder, fit_before_floor, observed_order,
                        solve_coefficient_system)
from .expr import ExpressionError, evaluate, parse
from .fields import CoefficientField
from .grid import GridFunction, GridSpec, MultiIndex, delta, delta2, delta_alpha, norms, shift
from .operators import (OperatorContext, Stencil, apply_continuum_L, apply_Lh, apply_taylor_L, remainder_Oj,
                        symmetrize, validate_consistency, validate_monotone, verify_flags)
from .parabolic import (ParabolicProblem, TimeIntegratorConfig, max_principle_bound, solve_parabolic,
                        stable_dt)
from .presets import get_preset
from .richardson import ExtrapolationPlan, combine, make_plan, solve_accelerated, tilde_coeffs, vandermonde_coeffs

__version__ = "0.1.0"
