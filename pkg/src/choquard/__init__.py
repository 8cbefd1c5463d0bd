"""Numerical toolkit for fractional Choquard problems with variable exponents."""

from .config import Config, ConfigError, load_config
from .energy import EnergyBreakdown, NonlinearitySpec, Problem, apply_operator, choquard_term, energy, gradient
from .exponents import FieldSet, OnePointField, TwoPointField, validate_assumptions
from .expr import ExprError, eval_expr, parse_expr
from .mesh import DomainSpec, Mesh, build_mesh
from .solver import SolverParams, ball_minimize, estimate_constants, lambda_threshold, mountain_pass
from .vxnorm import gagliardo_modular, luxemburg_norm, x0_norm

__version__ = "0.1.0"
