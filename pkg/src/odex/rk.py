"""Adaptive Runge-Kutta reference solver.

Dormand-Prince 5(4) pair with PI step-size control and cubic Hermite
dense output onto the requested grid.  Serves as the classical baseline
and as the numerical oracle for systems without a closed-form solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MaxStepsExceeded, StepUnderflow
from .odes import ODESystem, TimeGrid, Trajectory, check_state, eval_f

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])

# PI controller constants (safety factor, error exponents, factor clamps).
_SAFETY = 0.9
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0

# Steps smaller than this fraction of the span cannot make progress.
_UNDERFLOW_FRACTION = 1e-14


@dataclass(frozen=True)
class RKConfig:
    rtol: float = 1e-6
    atol: float = 1e-9
    initial_step: float = 1e-2
    max_steps: int = 100_000

    def __post_init__(self):
        if not (self.rtol > 0.0) or not (self.atol > 0.0):
            raise ValueError("rtol and atol must be positive")
        if not (self.initial_step > 0.0):
            raise ValueError("initial_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def tight_reference() -> RKConfig:
    """Configuration used whenever a run needs a trusted numerical oracle."""
    return RKConfig(rtol=1e-10, atol=1e-10, initial_step=1e-3)


def _hermite(t, t0, h, x0, f0, x1, f1):
    """Cubic Hermite interpolant on one accepted step (4th-order accurate)."""
    theta = (t - t0) / h
    th2 = theta * theta
    th3 = th2 * theta
    return ((2 * th3 - 3 * th2 + 1) * x0
            + (th3 - 2 * th2 + theta) * h * f0
            + (-2 * th3 + 3 * th2) * x1
            + (th3 - th2) * h * f1)


def rk45_solve(system: ODESystem, x0, t_span: tuple[float, float],
               config: RKConfig = RKConfig(),
               output_grid: TimeGrid | None = None) -> Trajectory:
    """Integrate the system over ``t_span`` and evaluate on ``output_grid``.

    Steps adapt to the local error estimate of the embedded 4th-order
    solution; accepted steps are interpolated onto the grid.  The grid
    defaults to 101 uniform points over the span.
    """
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not t_end > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    span = t_end - t0
    if output_grid is None:
        output_grid = TimeGrid(t0, span / 100.0, 101)
    out_times = output_grid.times()
    if out_times[0] < t0 - 1e-12 * max(1.0, abs(t0)) or \
            out_times[-1] > t_end + 1e-12 * max(1.0, abs(t_end)):
        raise ValueError("output grid extends beyond the integration span")

    x = check_state(system, x0)
    n_evals = 0

    def f(t, y):
        nonlocal n_evals
        n_evals += 1
        return eval_f(system, t, y)

    # One row per accepted step: (t_n, h_n, x_n, f_n, x_{n+1}, f_{n+1}).
    steps = []
    t = t0
    k1 = f(t, x)
    h = min(config.initial_step, span)
    err_prev = 1.0
    n_steps = 0

    while t < t_end - 1e-14 * span:
        if h < _UNDERFLOW_FRACTION * span:
            raise StepUnderflow(
                f"step size {h:g} fell below {_UNDERFLOW_FRACTION:g} x span at t={t:g}"
            )
        if n_steps >= config.max_steps:
            raise MaxStepsExceeded(
                f"exceeded {config.max_steps} steps at t={t:g}"
            )
        h = min(h, t_end - t)
        k = np.empty((7, system.dim))
        k[0] = k1
        for i in range(1, 7):
            xi = x + h * (_A[i] @ k[:i])
            k[i] = f(t + _C[i] * h, xi)
        x5 = x + h * (_B5 @ k)
        x4 = x + h * (_B4 @ k)
        scale = config.atol + config.rtol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.sqrt(np.mean(((x5 - x4) / scale) ** 2)))
        n_steps += 1
        if err <= 1.0:
            # Stage 7 sits at (t + h, x5), so it seeds the next step (FSAL).
            f_new = k[6]
            steps.append((t, h, x.copy(), k1.copy(), x5.copy(), f_new.copy()))
            t = t + h
            x = x5
            k1 = f_new
            err = max(err, 1e-10)
            factor = _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA
            err_prev = err
            h = h * min(_FAC_MAX, max(_FAC_MIN, factor))
        else:
            factor = _SAFETY * err ** (-_ALPHA)
            h = h * min(1.0, max(_FAC_MIN, factor))

    # Dense output: walk the grid through the accepted steps.
    states = np.empty((output_grid.count, system.dim))
    step_idx = 0
    for j, tq in enumerate(out_times):
        if not steps:
            states[j] = x  # span collapsed to a point; nothing integrated
            continue
        while step_idx < len(steps) - 1 and tq > steps[step_idx][0] + steps[step_idx][1]:
            step_idx += 1
        ts, hs, xs, fs, xe, fe = steps[step_idx]
        states[j] = _hermite(tq, ts, hs, xs, fs, xe, fe)

    return Trajectory(grid=output_grid, states=states, f_evals=n_evals)
