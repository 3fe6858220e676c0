"""odeasym: numerical lab for weighted long-run bounds of additively
forced linear ODEs.

The package solves y' = -alpha y + f and x' = A x + F with exact
per-step integrating factors, computes moving-window averages of the
forcing, diagnoses weight-function classes, and cross-checks both sides
of the characterisation theorems that tie window averages to solution
growth.
"""

__version__ = "0.1.0"

from .classify import (LimsupEstimate, ThetaProfile, WindowPolicy,
                       check_bigO, check_derivative_bounds,
                       check_exact_order, check_exponential_stability,
                       check_le_preservation, check_littleo,
                       check_unstable_dominant, estimate_liapunov,
                       limsup_ratio, theta_profile)
from .config import ConfigError, load_builtin_corpus, load_config
from .expr import (EvalDomainError, ExprSyntaxError, FunctionExpr,
                   ScalarFunction, differentiate, evaluate, parse_expr)
from .forcing import (Decomposition, MovingAverageField, decompose,
                      moving_average, moving_average_field,
                      oscillatory_forcing, verify_decomposition_identity)
from .quadrature import QuadratureError, adaptive_quad
from .report import ResidualReport
from .scenarios import (THEOREMS, ClassificationReport, Scenario,
                        cross_check)
from .solver import (Grid, GridError, SpectralData, SystemSpec, Trajectory,
                     derivative_trajectory, matrix_exponential,
                     resolvent_integral, solve_scalar,
                     solve_scalar_general_rate, solve_system, spectral_data,
                     verify_ave_identity, verify_cross_representations,
                     verify_representation)
from .weights import (WeightClass, WeightDiagnostic, WeightFunction,
                      conv_exp_ratio, integral_transforms,
                      log_derivative_rate, smooth_delta,
                      verify_subexponential)

__all__ = [name for name in dir() if not name.startswith("_")]
