"""Posterior error assessment for a proposed ODE solution.

Given states x_1:N on a grid, the derivative of the interpolating GP is
compared against the vector field at each knotpoint.  The squared
mismatch plus the predictive variance gives a per-knotpoint derivative
error variance; conditioning the values on the field derivatives with
that noise level yields a log-likelihood of the proposed solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .gp import DerivOrder, KernelConfig, Observation, derive_seed
from .odes import ODESystem, Trajectory, eval_f

VALUE = DerivOrder.VALUE
FIRST = DerivOrder.FIRST

_TAG_ASSESS = 6


@dataclass
class ErrorReport:
    """Per-knotpoint derivative error variances and solution likelihood.

    Arrays cover knotpoints 2..N (the initial state is taken as exact);
    log_likelihood_per_knot is the total divided by the number of scored
    scalar states.
    """

    times: np.ndarray
    deriv_error_var: np.ndarray
    posterior_std: np.ndarray
    log_likelihood: float
    log_likelihood_per_knot: float


def estimate_errors(system: ODESystem, solution: Trajectory,
                    kernel: KernelConfig = KernelConfig(),
                    sample_based: bool = False,
                    seed: int = 0) -> ErrorReport:
    """Score a trajectory against its own vector field.

    For each dimension the states are interpolated by a GP (conditioned on
    all values plus the exact initial derivative); the derivative error
    variance at knotpoint n is (f(x_n) - E[dx/dt at t_n])^2 + Var[dx/dt at
    t_n].  With ``sample_based`` the mean is replaced by one posterior
    draw of the derivative.  The log-likelihood then scores the states
    under the GP conditioned on the field derivatives observed with those
    variances.
    """
    grid = solution.grid
    times = grid.times()
    n = grid.count
    if n < 2:
        raise ValueError("error assessment needs at least two knotpoints")
    states = solution.states
    dim = states.shape[1]
    field_vals = np.empty((n, dim))
    for i in range(n):
        field_vals[i] = eval_f(system, times[i], states[i])

    deriv_error_var = np.empty((n - 1, dim))
    posterior_std = np.empty((n - 1, dim))
    total = 0.0
    deriv_queries = [(t, FIRST) for t in times[1:]]
    value_queries = [(t, VALUE) for t in times[1:]]
    for k in range(dim):
        value_obs = [Observation(times[i], VALUE, states[i, k], 0.0)
                     for i in range(n)]
        value_obs.append(Observation(times[0], FIRST, field_vals[0, k], 0.0))
        deriv_belief = gp.condition(kernel, value_obs, deriv_queries)
        predicted = deriv_belief.mean
        if sample_based:
            predicted = gp.sample(deriv_belief,
                                  derive_seed(seed, _TAG_ASSESS, k))
            mismatch = (field_vals[1:, k] - predicted) ** 2
        else:
            spread = np.clip(np.diag(deriv_belief.cov), 0.0, None)
            mismatch = (field_vals[1:, k] - predicted) ** 2 + spread
        deriv_error_var[:, k] = mismatch

        scored_obs = [Observation(times[0], VALUE, states[0, k], 0.0),
                      Observation(times[0], FIRST, field_vals[0, k], 0.0)]
        scored_obs += [Observation(times[i], FIRST, field_vals[i, k],
                                   deriv_error_var[i - 1, k])
                       for i in range(1, n)]
        value_belief = gp.condition(kernel, scored_obs, value_queries)
        posterior_std[:, k] = value_belief.std
        total += value_belief.logpdf(states[1:, k])

    scored = (n - 1) * dim
    return ErrorReport(times=times[1:].copy(),
                       deriv_error_var=deriv_error_var,
                       posterior_std=posterior_std,
                       log_likelihood=float(total),
                       log_likelihood_per_knot=float(total) / scored)
