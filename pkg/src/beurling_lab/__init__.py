"""Numerical laboratory for Beurling generalized primes and their Dirichlet series."""

from __future__ import annotations

from .counting import (CountingFunction, ResidualReport, counting_function, fit_density,
                       residual_report, supply_density)
from .expansion import (CoefficientSeries, ExpansionBudgetError, TooManyIndicesError,
                        brute_force_integers, dirichlet_multiply, expand_integers,
                        expand_reciprocal, selberg_series, shift_series, unit_series)
from .geodesic import (InconclusiveError, class_number, conjugacy_bfs_oracle,
                       fundamental_unit, geodesic_system, norms_by_trace, pgt_residual_profile)
from .moments import (AccuracyError, MomentReport, continuation_fast, convergence_run,
                      eval_continuation, fejer_pair_check, mean_square_difference,
                      moment_closed_form, moment_quadrature, rhs_series)
from .primes import (DomainError, GPrimeSystem, OutOfRangeError, gen_jittered_system,
                     gen_li_inverse_system, gen_rational_primes, li, li_inverse, pi_count)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "CoefficientSeries", "CountingFunction", "DomainError",
    "ExpansionBudgetError", "GPrimeSystem", "InconclusiveError", "MomentReport",
    "OutOfRangeError", "ResidualReport", "TooManyIndicesError", "brute_force_integers",
    "class_number", "conjugacy_bfs_oracle", "continuation_fast", "convergence_run",
    "counting_function", "dirichlet_multiply", "eval_continuation", "expand_integers",
    "expand_reciprocal", "fejer_pair_check", "fit_density", "fundamental_unit",
    "gen_jittered_system", "gen_li_inverse_system", "gen_rational_primes",
    "geodesic_system", "li", "li_inverse", "mean_square_difference", "moment_closed_form",
    "moment_quadrature", "norms_by_trace", "pgt_residual_profile", "pi_count",
    "residual_report", "rhs_series", "selberg_series", "shift_series", "supply_density",
    "unit_series",
]
