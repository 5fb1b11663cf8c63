"""Gaussian-process solvers for initial value problems.

The library builds ODE solvers out of GP regression with derivative
observations: sequential and multistep sampling schemes, implicit
fixed-point schemes, gradient matching, and a direct GP treatment of
linear systems, plus an adaptive Runge-Kutta baseline and posterior
error assessment for any proposed solution.
"""

from .diagnostics import ErrorReport, estimate_errors
from .errors import (ConfigError, DimensionMismatch, MaxStepsExceeded,
                     MissingDerivativeInfo, NonConvergence, OdexError,
                     ParseError, SingularGram, SingularParameter,
                     StepUnderflow)
from .gp import (DerivOrder, GaussianBelief, KernelConfig, Observation,
                 ObservationSet, build_gram, condition, derive_seed,
                 kernel_eval, sample)
from .odes import (LinearODEModel, ODESystem, TimeGrid, Trajectory,
                   eval_f, eval_jacobian, eval_second_derivative,
                   eval_time_partial, forced_oscillator, linear_system,
                   van_der_pol)
from .rk import RKConfig, rk45_solve, tight_reference
from .solvers import (SolutionEnsemble, SolverConfig, belief_states,
                      explicit_solve, gradient_match_solve, implicit_moment_solve,
                      implicit_sample, linear_gp_solve, skilling_solve)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DerivOrder", "DimensionMismatch", "ErrorReport",
    "GaussianBelief", "KernelConfig", "LinearODEModel", "MaxStepsExceeded",
    "MissingDerivativeInfo", "NonConvergence", "ODESystem", "Observation",
    "ObservationSet", "OdexError", "ParseError", "RKConfig",
    "SingularGram", "SingularParameter", "SolutionEnsemble", "SolverConfig",
    "StepUnderflow", "TimeGrid", "Trajectory", "belief_states", "build_gram",
    "condition", "derive_seed", "estimate_errors", "eval_f", "eval_jacobian",
    "eval_second_derivative", "eval_time_partial", "explicit_solve",
    "forced_oscillator", "gradient_match_solve", "implicit_moment_solve",
    "implicit_sample", "kernel_eval", "linear_gp_solve", "linear_system",
    "rk45_solve", "sample", "skilling_solve", "tight_reference",
    "van_der_pol",
]
