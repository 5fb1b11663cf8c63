"""ODE systems, time grids, and trajectories.

Systems carry the vector field plus optional analytic Jacobian, time
partial, and exact solution.  When an analytic derivative is missing and
the fallback is allowed, central finite differences stand in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, MissingDerivativeInfo, SingularParameter

# Pole guard for the forced oscillator's closed-form solution.
_THETA_POLE_TOL = 1e-9

# Relative central-difference step for the derivative fallbacks.
_FD_SCALE = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    """Uniform knotpoint grid t_start + step * (0 .. count-1)."""

    t_start: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0.0):
            raise ValueError(f"step must be positive, got {self.step}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.step * (self.count - 1)

    def times(self) -> np.ndarray:
        return self.t_start + self.step * np.arange(self.count, dtype=float)


@dataclass(frozen=True)
class ODESystem:
    """First-order IVP right-hand side dx/dt = f(t, x) with metadata.

    jacobian(t, x) returns df/dx (dim x dim); time_partial(t, x) returns
    df/dt (dim,); exact(t) returns the closed-form solution when one is
    known for the system's built-in initial condition.
    """

    dim: int
    f: Callable[[float, np.ndarray], np.ndarray]
    name: str = ""
    params: tuple = ()
    jacobian: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    time_partial: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    exact: Optional[Callable[[float], np.ndarray]] = None
    x0_default: Optional[tuple] = None
    allow_fd_fallback: bool = True


@dataclass(frozen=True)
class LinearODEModel:
    """Linear vector field f(t, x) = L x - phi(t) with optional model noise.

    ``phi`` may be None (zero forcing), a constant vector, or a callable
    t -> vector.  ``noise_var`` is the variance of the white model error.
    """

    matrix: np.ndarray
    phi: object = None
    noise_var: float = 0.0

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(
                f"matrix must be square, got shape {mat.shape}")
        object.__setattr__(self, "matrix", mat)
        if self.noise_var < 0.0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def phi_at(self, t: float) -> np.ndarray:
        if self.phi is None:
            return np.zeros(self.dim)
        if callable(self.phi):
            return np.asarray(self.phi(t), dtype=float)
        return np.asarray(self.phi, dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """States sampled on a time grid; shape (grid.count, dim)."""

    grid: TimeGrid
    states: np.ndarray
    f_evals: int = 0

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if states.shape[0] != self.grid.count:
            raise DimensionMismatch(
                f"trajectory has {states.shape[0]} rows for a grid of "
                f"{self.grid.count} knotpoints"
            )
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def check_state(system: ODESystem, x: object) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (system.dim,):
        raise DimensionMismatch(
            f"state shape {x.shape} does not match system dimension {system.dim}"
        )
    return x


def eval_f(system: ODESystem, t: float, x) -> np.ndarray:
    """Vector field evaluation with shape validation on both ends."""
    x = check_state(system, x)
    out = np.atleast_1d(np.asarray(system.f(float(t), x), dtype=float))
    if out.shape != (system.dim,):
        raise DimensionMismatch(
            f"f returned shape {out.shape} for system dimension {system.dim}"
        )
    return out


def _fd_jacobian(system: ODESystem, t: float, x: np.ndarray) -> np.ndarray:
    jac = np.empty((system.dim, system.dim))
    for j in range(system.dim):
        h = _FD_SCALE * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (eval_f(system, t, xp) - eval_f(system, t, xm)) / (2.0 * h)
    return jac


def _fd_time_partial(system: ODESystem, t: float, x: np.ndarray) -> np.ndarray:
    h = _FD_SCALE * max(1.0, abs(t))
    return (eval_f(system, t + h, x) - eval_f(system, t - h, x)) / (2.0 * h)


def eval_jacobian(system: ODESystem, t: float, x) -> np.ndarray:
    x = check_state(system, x)
    if system.jacobian is not None:
        jac = np.atleast_2d(np.asarray(system.jacobian(float(t), x), dtype=float))
        if jac.shape != (system.dim, system.dim):
            raise DimensionMismatch(
                f"jacobian shape {jac.shape}, expected {(system.dim, system.dim)}"
            )
        return jac
    if not system.allow_fd_fallback:
        raise MissingDerivativeInfo(
            f"system {system.name or '<anonymous>'} has no Jacobian and the "
            "finite-difference fallback is disabled"
        )
    return _fd_jacobian(system, t, x)


def eval_time_partial(system: ODESystem, t: float, x) -> np.ndarray:
    x = check_state(system, x)
    if system.time_partial is not None:
        out = np.atleast_1d(np.asarray(system.time_partial(float(t), x), dtype=float))
        if out.shape != (system.dim,):
            raise DimensionMismatch(
                f"time partial shape {out.shape}, expected {(system.dim,)}"
            )
        return out
    if not system.allow_fd_fallback:
        raise MissingDerivativeInfo(
            f"system {system.name or '<anonymous>'} has no time partial and "
            "the finite-difference fallback is disabled"
        )
    return _fd_time_partial(system, t, x)


def eval_second_derivative(system: ODESystem, t: float, x) -> np.ndarray:
    """Second time derivative of the solution through the chain rule:
    d^2x/dt^2 = df/dt + J f, evaluated along a trajectory of the ODE."""
    x = check_state(system, x)
    fx = eval_f(system, t, x)
    return eval_time_partial(system, t, x) + eval_jacobian(system, t, x) @ fx


def forced_oscillator(theta: float) -> ODESystem:
    """Sinusoidally forced oscillator with a closed-form solution.

    f1 = x2, f2 = -x1 + sin(theta t), started from (-1, 0).  theta with
    theta^2 = 1 resonates and has no solution of this form.
    """
    theta = float(theta)
    denom = theta * theta - 1.0
    if abs(denom) < _THETA_POLE_TOL:
        raise SingularParameter(
            f"forced oscillator requires |theta^2 - 1| >= {_THETA_POLE_TOL:g}, "
            f"got theta = {theta}"
        )

    def f(t, x):
        return np.array([x[1], -x[0] + np.sin(theta * t)])

    def jacobian(t, x):
        return np.array([[0.0, 1.0], [-1.0, 0.0]])

    def time_partial(t, x):
        return np.array([0.0, theta * np.cos(theta * t)])

    def exact(t):
        x1 = (-theta * theta * np.cos(t) + theta * np.sin(t)
              - np.sin(theta * t) + np.cos(t)) / denom
        x2 = (theta * theta * np.sin(t) + theta * np.cos(t)
              - theta * np.cos(theta * t) - np.sin(t)) / denom
        return np.array([x1, x2])

    return ODESystem(dim=2, f=f, name="forced_oscillator", params=(theta,),
                     jacobian=jacobian, time_partial=time_partial, exact=exact,
                     x0_default=(-1.0, 0.0))


def van_der_pol(theta: float) -> ODESystem:
    """Van der Pol oscillator f1 = x2, f2 = -x1 + theta (1 - x1^2) x2."""
    theta = float(theta)

    def f(t, x):
        return np.array([x[1], -x[0] + theta * (1.0 - x[0] * x[0]) * x[1]])

    def jacobian(t, x):
        return np.array([
            [0.0, 1.0],
            [-1.0 - 2.0 * theta * x[0] * x[1], theta * (1.0 - x[0] * x[0])],
        ])

    def time_partial(t, x):
        return np.zeros(2)

    return ODESystem(dim=2, f=f, name="van_der_pol", params=(theta,),
                     jacobian=jacobian, time_partial=time_partial,
                     x0_default=(2.0, 0.0))


def _eig_exact(matrix: np.ndarray, phi_const: np.ndarray,
               x0: np.ndarray, t0: float):
    """Closed-form solution of dx/dt = L x - phi (constant phi) through the
    eigendecomposition of L; None when L is too far from diagonalizable or
    a constant particular solution does not exist."""
    dim = matrix.shape[0]
    evals, vecs = np.linalg.eig(matrix)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > 1e8:
        return None
    if np.any(np.abs(phi_const) > 0.0):
        try:
            particular = np.linalg.solve(matrix, phi_const)
        except np.linalg.LinAlgError:
            return None
    else:
        particular = np.zeros(dim)
    coeffs = np.linalg.solve(vecs, x0.astype(complex) - particular)

    def exact(t):
        z = vecs @ (coeffs * np.exp(evals * (t - t0)))
        return np.real(z) + particular

    return exact


def linear_system(matrix, phi=None, x0=None, t0: float = 0.0,
                  noise_var: float = 0.0) -> ODESystem:
    """Linear system f(t, x) = L x - phi(t).

    For constant (or absent) forcing, diagonalizable L, and a given initial
    state the exact solution is attached via the eigendecomposition of L.
    """
    model = LinearODEModel(matrix=matrix, phi=phi, noise_var=noise_var)
    mat = model.matrix
    dim = model.dim
    phi_callable = callable(phi)

    def f(t, x):
        return mat @ x - model.phi_at(t)

    def jacobian(t, x):
        return mat.copy()

    if phi_callable:
        time_partial = None  # falls back to finite differences of f
    else:
        def time_partial(t, x):
            return np.zeros(dim)

    exact = None
    if x0 is not None and not phi_callable:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if x0.shape != (dim,):
            raise DimensionMismatch(
                f"x0 shape {x0.shape} does not match matrix dimension {dim}"
            )
        exact = _eig_exact(mat, model.phi_at(t0), x0, t0)

    return ODESystem(dim=dim, f=f, name="linear", params=(),
                     jacobian=jacobian, time_partial=time_partial, exact=exact,
                     x0_default=None if x0 is None else tuple(x0))
