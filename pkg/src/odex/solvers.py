"""Gaussian-process initial value problem solvers.

Five schemes over a shared scalar-GP backbone (one independent GP per
state dimension, common kernel and time grid):

* ``skilling_solve``      sequential sampling that retains only derivative
                          observations, each tagged with its predictive
                          variance at sampling time
* ``explicit_solve``      multistep sampling: putative draw, derivative
                          evaluation there, then a conditioned redraw
* ``implicit_sample``     iterated joint redraws of the whole window for a
                          fixed iteration budget
* ``implicit_moment_solve`` deterministic fixed point on the window mean,
                          propagating a Gaussian belief
* ``gradient_match_solve`` window states chosen so GP-implied derivatives
                          match the vector field, via Gauss-Newton

plus ``linear_gp_solve``, the direct GP treatment of linear systems where
the defect dx/dt - L x is observed as the forcing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import gp
from .errors import DimensionMismatch, NonConvergence
from .gp import (DerivOrder, GaussianBelief, KernelConfig, Observation,
                 derive_seed)
from .odes import (LinearODEModel, ODESystem, TimeGrid, check_state, eval_f,
                   eval_jacobian, eval_second_derivative)

VALUE = DerivOrder.VALUE
FIRST = DerivOrder.FIRST
SECOND = DerivOrder.SECOND

# Solver tags fed into seed derivation so no two solvers share a stream.
_TAG_SKILLING = 1
_TAG_EXPLICIT = 2
_TAG_IMPLICIT = 3


@dataclass(frozen=True)
class SolverConfig:
    """Shared knobs for the GP solvers.

    window is the sliding history length M, ensemble the number of sampled
    trajectories S, max_iters the fixed-point budget I, fp_tol its
    convergence threshold.  Seeds must be non-negative; every random draw
    inside a solver uses a child seed derived from (seed, solver, member,
    step/iteration, dimension), so results are independent of evaluation
    order.
    """

    grid: TimeGrid
    window: int = 5
    ensemble: int = 20
    max_iters: int = 50
    fp_tol: float = 1e-8
    use_second_derivatives: bool = False
    kernel: KernelConfig = KernelConfig()
    seed: int = 0
    skilling_include_values: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.ensemble < 1:
            raise ValueError(f"ensemble must be >= 1, got {self.ensemble}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not (self.fp_tol > 0.0):
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


@dataclass
class SolutionEnsemble:
    """Solver output on the knotpoint grid.

    samples has shape (S, N, dim); the moment-based solvers return an
    empty (0, N, dim) block and fill mean/std from their Gaussian belief.
    For sampling solvers mean/std are the per-knotpoint statistics of the
    samples.  info carries per-solver diagnostics (iteration counts,
    objective traces).
    """

    grid: TimeGrid
    samples: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    f_evals: int = 0
    info: dict = field(default_factory=dict)


def _counted(system: ODESystem):
    """System clone whose f counts invocations (FD fallbacks included)."""
    box = {"n": 0}
    inner = system.f

    def f(t, x):
        box["n"] += 1
        return inner(t, x)

    return replace(system, f=f), box


def _from_samples(grid: TimeGrid, samples: np.ndarray, f_evals: int,
                  info: dict | None = None) -> SolutionEnsemble:
    return SolutionEnsemble(grid=grid, samples=samples,
                            mean=samples.mean(axis=0),
                            std=samples.std(axis=0),
                            f_evals=f_evals, info=info or {})


def _seconds_if_enabled(cfg: SolverConfig, system: ODESystem,
                        t: float, x: np.ndarray):
    if not cfg.use_second_derivatives:
        return None
    return eval_second_derivative(system, t, x)


# ---------------------------------------------------------------------------
# Sequential sampling with derivative-only memory


def skilling_solve(system: ODESystem, x0, config: SolverConfig) -> SolutionEnsemble:
    """Sequential GP solver that keeps only derivative observations.

    Each sweep walks the grid: sample a state from the running posterior,
    evaluate the vector field there, and store that derivative as a noisy
    observation whose variance is the posterior's predictive variance of
    the derivative at that knotpoint.  The sampled state itself is thrown
    away (optionally kept as a noisy value observation via
    ``skilling_include_values``).  The sweep's final posterior conditions
    on the initial value plus the full noisy derivative record, and one
    trajectory is drawn from it per sweep.
    """
    x0 = check_state(system, x0)
    grid = config.grid
    times = grid.times()
    n, dim = grid.count, system.dim
    csys, count = _counted(system)
    samples = np.empty((config.ensemble, n, dim))
    for member in range(config.ensemble):
        samples[member] = _skilling_sweep(csys, x0, config, times, member)
    return _from_samples(grid, samples, count["n"])


def _skilling_sweep(system: ODESystem, x0, config: SolverConfig,
                    times: np.ndarray, member: int) -> np.ndarray:
    n = times.size
    dim = system.dim
    traj = np.empty((n, dim))
    traj[0] = x0
    if n == 1:
        return traj
    f0 = eval_f(system, times[0], x0)
    obs = [[Observation(times[0], VALUE, x0[k], 0.0),
            Observation(times[0], FIRST, f0[k], 0.0)] for k in range(dim)]
    extra_values = [[] for _ in range(dim)]
    for step in range(1, n):
        t = times[step]
        x_here = np.empty(dim)
        deriv_var = np.empty(dim)
        for k in range(dim):
            belief = gp.condition(config.kernel, obs[k],
                                  [(t, VALUE), (t, FIRST)])
            seed = derive_seed(config.seed, _TAG_SKILLING, member, step, k)
            x_here[k] = gp.sample(belief.marginal(0), seed)[0]
            deriv_var[k] = max(belief.cov[1, 1], 0.0)
            if config.skilling_include_values:
                extra_values[k].append(
                    Observation(t, VALUE, x_here[k], max(belief.cov[0, 0], 0.0)))
        f_here = eval_f(system, t, x_here)
        for k in range(dim):
            obs[k].append(Observation(t, FIRST, f_here[k], deriv_var[k]))
    queries = [(t, VALUE) for t in times[1:]]
    for k in range(dim):
        belief = gp.condition(config.kernel, obs[k] + extra_values[k], queries)
        seed = derive_seed(config.seed, _TAG_SKILLING, member, 0, k)
        traj[1:, k] = gp.sample(belief, seed)
    return traj


# ---------------------------------------------------------------------------
# Explicit multistep sampling


def explicit_solve(system: ODESystem, x0, config: SolverConfig) -> SolutionEnsemble:
    """Explicit GP multistep solver.

    Per step: draw a putative next state from the posterior given the last
    window+1 states and their derivatives, evaluate the vector field at the
    putative state, append that derivative to the conditioning set, and
    redraw the state.  Past window states are treated as noiseless.
    """
    x0 = check_state(system, x0)
    grid = config.grid
    times = grid.times()
    n, dim = grid.count, system.dim
    csys, count = _counted(system)
    samples = np.empty((config.ensemble, n, dim))
    for member in range(config.ensemble):
        samples[member] = _explicit_path(csys, x0, config, times, member)
    return _from_samples(grid, samples, count["n"])


def _explicit_path(system: ODESystem, x0, config: SolverConfig,
                   times: np.ndarray, member: int) -> np.ndarray:
    n = times.size
    dim = system.dim
    xs = np.empty((n, dim))
    fs = np.empty((n, dim))
    ss = np.empty((n, dim)) if config.use_second_derivatives else None
    xs[0] = x0
    fs[0] = eval_f(system, times[0], x0)
    if ss is not None:
        ss[0] = eval_second_derivative(system, times[0], x0)
    for step in range(n - 1):
        lo = max(0, step - config.window)
        idx = range(lo, step + 1)
        t_next = times[step + 1]
        base = []
        for k in range(dim):
            obs_k = [Observation(times[j], VALUE, xs[j, k], 0.0) for j in idx]
            obs_k += [Observation(times[j], FIRST, fs[j, k], 0.0) for j in idx]
            if ss is not None:
                obs_k += [Observation(times[j], SECOND, ss[j, k], 0.0)
                          for j in idx]
            base.append(obs_k)
        putative = np.empty(dim)
        for k in range(dim):
            belief = gp.condition(config.kernel, base[k], [(t_next, VALUE)])
            seed = derive_seed(config.seed, _TAG_EXPLICIT, member, step, k, 0)
            putative[k] = gp.sample(belief, seed)[0]
        f_put = eval_f(system, t_next, putative)
        s_put = _seconds_if_enabled(config, system, t_next, putative)
        for k in range(dim):
            obs_k = base[k] + [Observation(t_next, FIRST, f_put[k], 0.0)]
            if s_put is not None:
                obs_k.append(Observation(t_next, SECOND, s_put[k], 0.0))
            belief = gp.condition(config.kernel, obs_k, [(t_next, VALUE)])
            seed = derive_seed(config.seed, _TAG_EXPLICIT, member, step, k, 1)
            xs[step + 1, k] = gp.sample(belief, seed)[0]
        fs[step + 1] = eval_f(system, t_next, xs[step + 1])
        if ss is not None:
            ss[step + 1] = eval_second_derivative(system, t_next, xs[step + 1])
    return xs


# ---------------------------------------------------------------------------
# Shared sliding-window scaffolding for the implicit and matching solvers


class _Window:
    """Sliding window over unsolved knotpoints with a noisy left anchor.

    The anchor is the most recently departed state, observed with the
    variance its window belief had converged to; its derivative (the
    vector field at the anchor value) is kept as an observation with the
    same variance.  The first anchor is the exact initial state.
    """

    def __init__(self, system: ODESystem, config: SolverConfig,
                 times: np.ndarray, x0: np.ndarray):
        self.system = system
        self.config = config
        self.times = times
        self.start = 1
        self.stop = min(1 + config.window, times.size)  # exclusive
        self.anchor_t = times[0]
        self.anchor_x = x0.copy()
        self.anchor_var = np.zeros(x0.size)
        self.anchor_f = eval_f(system, times[0], x0)
        self.anchor_s = _seconds_if_enabled(config, system, times[0], x0)
        self.states = np.tile(x0, (self.stop - 1, 1))

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    @property
    def at_end(self) -> bool:
        return self.stop == self.times.size

    def observations(self, derivs: np.ndarray, seconds, k: int):
        """Conditioning set for dimension k given window derivatives."""
        obs = [Observation(self.anchor_t, VALUE, self.anchor_x[k],
                           self.anchor_var[k]),
               Observation(self.anchor_t, FIRST, self.anchor_f[k],
                           self.anchor_var[k])]
        if self.anchor_s is not None:
            obs.append(Observation(self.anchor_t, SECOND, self.anchor_s[k],
                                   self.anchor_var[k]))
        for row, j in enumerate(self.indices):
            obs.append(Observation(self.times[j], FIRST, derivs[row, k], 0.0))
            if seconds is not None:
                obs.append(Observation(self.times[j], SECOND,
                                       seconds[row, k], 0.0))
        return obs

    def queries(self):
        return [(self.times[j], VALUE) for j in self.indices]

    def window_derivs(self, states: np.ndarray):
        derivs = np.empty_like(states)
        seconds = np.empty_like(states) if self.config.use_second_derivatives else None
        for row, j in enumerate(self.indices):
            derivs[row] = eval_f(self.system, self.times[j], states[row])
            if seconds is not None:
                seconds[row] = eval_second_derivative(
                    self.system, self.times[j], states[row])
        return derivs, seconds

    def slide(self, var_front: np.ndarray):
        """Finalize the leading knotpoint and advance one step."""
        self.anchor_t = self.times[self.start]
        self.anchor_x = self.states[0].copy()
        self.anchor_var = np.clip(var_front, 0.0, None)
        self.anchor_f = eval_f(self.system, self.anchor_t, self.anchor_x)
        self.anchor_s = _seconds_if_enabled(self.config, self.system,
                                            self.anchor_t, self.anchor_x)
        self.start += 1
        self.stop += 1
        self.states = np.vstack([self.states[1:], self.states[-1:]])


# ---------------------------------------------------------------------------
# Implicit solvers


def implicit_sample(system: ODESystem, x0, config: SolverConfig) -> SolutionEnsemble:
    """Implicit GP solver, sampling variant.

    Within each window: evaluate the vector field at the current sample,
    condition the window belief on those derivatives plus the anchor, and
    jointly redraw the window, for a fixed budget of iterations.  Window
    states start as a constant extrapolation.  With window >= count - 1
    this is the whole-trajectory recursion.
    """
    x0 = check_state(system, x0)
    grid = config.grid
    times = grid.times()
    n, dim = grid.count, system.dim
    csys, count = _counted(system)
    samples = np.empty((config.ensemble, n, dim))
    for member in range(config.ensemble):
        samples[member] = _implicit_path(csys, x0, config, times, member)
    return _from_samples(grid, samples, count["n"])


def _implicit_path(system: ODESystem, x0, config: SolverConfig,
                   times: np.ndarray, member: int) -> np.ndarray:
    n = times.size
    dim = system.dim
    traj = np.empty((n, dim))
    traj[0] = x0
    if n == 1:
        return traj
    win = _Window(system, config, times, x0)
    while True:
        beliefs = [None] * dim
        for it in range(1, config.max_iters + 1):
            derivs, seconds = win.window_derivs(win.states)
            for k in range(dim):
                beliefs[k] = gp.condition(config.kernel,
                                          win.observations(derivs, seconds, k),
                                          win.queries())
                seed = derive_seed(config.seed, _TAG_IMPLICIT, member,
                                   win.start, it, k)
                win.states[:, k] = gp.sample(beliefs[k], seed)
        if win.at_end:
            traj[win.start:] = win.states
            return traj
        traj[win.start] = win.states[0]
        if config.max_iters == 0:
            win.slide(np.zeros(dim))
        else:
            win.slide(np.array([beliefs[k].cov[0, 0] for k in range(dim)]))


def implicit_moment_solve(system: ODESystem, x0,
                          config: SolverConfig) -> SolutionEnsemble:
    """Implicit GP solver, deterministic moment variant.

    Maintains a Gaussian belief over the window: the vector field is
    evaluated at the current window mean, the belief is reconditioned on
    those derivatives plus the anchor, and the loop repeats until the mean
    moves less than fp_tol (else NonConvergence).  When the window slides,
    the departing state is anchored with its converged variance, which is
    how uncertainty accumulates over the integration.
    """
    x0 = check_state(system, x0)
    grid = config.grid
    times = grid.times()
    n, dim = grid.count, system.dim
    csys, count = _counted(system)
    mean = np.empty((n, dim))
    var = np.zeros((n, dim))
    mean[0] = x0
    info = {"window_iterations": []}
    if n == 1:
        return SolutionEnsemble(grid=grid, samples=np.empty((0, n, dim)),
                                mean=mean, std=np.sqrt(var),
                                f_evals=count["n"], info=info)
    win = _Window(csys, config, times, x0)
    while True:
        beliefs = [None] * dim
        converged = False
        for it in range(1, config.max_iters + 1):
            derivs, seconds = win.window_derivs(win.states)
            new_states = np.empty_like(win.states)
            for k in range(dim):
                beliefs[k] = gp.condition(config.kernel,
                                          win.observations(derivs, seconds, k),
                                          win.queries())
                new_states[:, k] = beliefs[k].mean
            delta = float(np.max(np.abs(new_states - win.states)))
            win.states = new_states
            if delta < config.fp_tol:
                converged = True
                info["window_iterations"].append(it)
                break
        if not converged:
            raise NonConvergence(
                f"window starting at t={times[win.start]:g} did not reach "
                f"{config.fp_tol:g} within {config.max_iters} iterations "
                "(step size or window may be too large)"
            )
        var_win = np.column_stack([np.clip(np.diag(beliefs[k].cov), 0.0, None)
                                   for k in range(dim)])
        if win.at_end:
            mean[win.start:] = win.states
            var[win.start:] = var_win
            break
        mean[win.start] = win.states[0]
        var[win.start] = var_win[0]
        win.slide(var_win[0])
    return SolutionEnsemble(grid=grid, samples=np.empty((0, n, dim)),
                            mean=mean, std=np.sqrt(var),
                            f_evals=count["n"], info=info)


# ---------------------------------------------------------------------------
# Gradient matching


def gradient_match_solve(system: ODESystem, x0,
                         config: SolverConfig) -> SolutionEnsemble:
    """Pick window states whose GP-implied derivatives match the field.

    The GP's derivative prediction at a window knotpoint is linear in the
    window values: pred = c + A x.  The solver minimizes the summed squared
    mismatch F(x) = sum (f(x) - c - A x)^2 by Gauss-Newton (linearize f at
    the iterate and equate the derivative of the quadratic model to zero),
    which lands on the minimizer in one solve when f is linear.  Means come
    from the converged states; stds from the GP posterior over values given
    the matched derivatives.
    """
    x0 = check_state(system, x0)
    if config.window < 2:
        raise ValueError(
            f"gradient matching needs window >= 2, got {config.window}")
    grid = config.grid
    times = grid.times()
    n, dim = grid.count, system.dim
    csys, count = _counted(system)
    mean = np.empty((n, dim))
    var = np.zeros((n, dim))
    mean[0] = x0
    info = {"window_iterations": [], "objective_traces": []}
    if n == 1:
        return SolutionEnsemble(grid=grid, samples=np.empty((0, n, dim)),
                                mean=mean, std=np.sqrt(var),
                                f_evals=count["n"], info=info)
    win = _Window(csys, config, times, x0)
    while True:
        trace = _match_window(csys, config, win, info)
        info["objective_traces"].append(trace)
        derivs, seconds = win.window_derivs(win.states)
        beliefs = [gp.condition(config.kernel,
                                win.observations(derivs, seconds, k),
                                win.queries())
                   for k in range(dim)]
        var_win = np.column_stack([np.clip(np.diag(beliefs[k].cov), 0.0, None)
                                   for k in range(dim)])
        if win.at_end:
            mean[win.start:] = win.states
            var[win.start:] = var_win
            break
        mean[win.start] = win.states[0]
        var[win.start] = var_win[0]
        win.slide(var_win[0])
    return SolutionEnsemble(grid=grid, samples=np.empty((0, n, dim)),
                            mean=mean, std=np.sqrt(var),
                            f_evals=count["n"], info=info)


def _match_window(system: ODESystem, config: SolverConfig, win: _Window,
                  info: dict) -> list[float]:
    """Gauss-Newton inner loop for one window; returns the F trace."""
    m = win.stop - win.start
    dim = system.dim
    t_win = win.times[win.start:win.stop]
    # Derivative-prediction weights: rows = derivative queries at window
    # knotpoints, columns = [anchor value, anchor deriv, window values].
    pts = [(win.anchor_t, VALUE), (win.anchor_t, FIRST)]
    pts += [(t, VALUE) for t in t_win]
    queries = [(t, FIRST) for t in t_win]
    fixed_parts = np.empty((dim, m))
    mats = np.empty((dim, m, m))
    for k in range(dim):
        noise = np.array([win.anchor_var[k], win.anchor_var[k]]
                         + [0.0] * m)
        k_yy = gp.build_gram(config.kernel, pts, pts)
        k_yy = 0.5 * (k_yy + k_yy.T) + np.diag(noise)
        chol_l, _ = gp._chol_with_jitter(k_yy)
        k_qy = gp.build_gram(config.kernel, queries, pts)
        weights = cho_solve((chol_l, True), k_qy.T).T
        fixed_parts[k] = weights[:, :2] @ np.array([win.anchor_x[k],
                                                    win.anchor_f[k]])
        mats[k] = weights[:, 2:]

    def residual(states):
        res = np.empty((m, dim))
        for row in range(m):
            res[row] = eval_f(system, t_win[row], states[row])
        for k in range(dim):
            res[:, k] -= fixed_parts[k] + mats[k] @ states[:, k]
        return res

    trace = []
    converged = False
    iters = 0
    for it in range(1, config.max_iters + 1):
        res = residual(win.states)
        trace.append(float(np.sum(res * res)))
        jac = np.zeros((m * dim, m * dim))
        for row in range(m):
            blk = eval_jacobian(system, t_win[row], win.states[row])
            jac[row * dim:(row + 1) * dim, row * dim:(row + 1) * dim] = blk
        for k in range(dim):
            jac[k::dim, k::dim] -= mats[k]
        delta, *_ = np.linalg.lstsq(jac, -res.reshape(-1), rcond=None)
        win.states = win.states + delta.reshape(m, dim)
        iters = it
        if float(np.max(np.abs(delta))) < config.fp_tol:
            converged = True
            break
    trace.append(float(np.sum(residual(win.states) ** 2)))
    if not converged:
        raise NonConvergence(
            f"gradient matching window at t={t_win[0]:g} did not reach "
            f"{config.fp_tol:g} within {config.max_iters} iterations"
        )
    info["window_iterations"].append(iters)
    return trace


# ---------------------------------------------------------------------------
# Direct GP solution of linear systems


def _uniform_gram(cfg: KernelConfig, rows, cols, order_left, order_right):
    pts_r = [(t, order_left) for t in rows]
    pts_c = [(t, order_right) for t in cols]
    return gp.build_gram(cfg, pts_r, pts_c)


def linear_gp_solve(model: LinearODEModel,
                    observations: Sequence[tuple[float, np.ndarray]],
                    boundary: Sequence[tuple[float, np.ndarray, DerivOrder]],
                    query_times: Sequence[float],
                    kernel: KernelConfig = KernelConfig()) -> GaussianBelief:
    """Posterior over states of dx/dt = L x - phi(t) given forcing values.

    The defect z(t) = dx/dt - L x is a linear functional of the GP path
    with Cov(z, x) = dC/dt - L C and Cov(z, z') = d2C/dtdt' - L dC/dt'
    - (dC/dt) L^T + L C L^T; under the model z(t_n) = -phi(t_n) + noise.
    Conditioning on those defect observations plus boundary value or
    derivative constraints yields a joint Gaussian over all queried
    states, ordered time-major (state dimension fastest).
    """
    mat = model.matrix
    dim = model.dim
    eye = np.eye(dim)
    if len(query_times) == 0:
        raise ValueError("query_times must be non-empty")

    bx_pts = []          # (time, order) for boundary rows
    bx_values = []
    for t, vec, order in boundary:
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if vec.shape != (dim,):
            raise DimensionMismatch(
                f"boundary value shape {vec.shape}, expected {(dim,)}")
        order = DerivOrder(order)
        bx_pts.append((float(t), order))
        bx_values.append(vec)

    z_times = []
    z_values = []
    for t, phi_val in observations:
        phi_val = np.atleast_1d(np.asarray(phi_val, dtype=float))
        if phi_val.shape != (dim,):
            raise DimensionMismatch(
                f"forcing value shape {phi_val.shape}, expected {(dim,)}")
        z_times.append(float(t))
        z_values.append(-phi_val)

    q_times = [float(t) for t in query_times]
    nb, nz = len(bx_pts), len(z_times)

    blocks = []
    if nb:
        k_bb = gp.build_gram(kernel, bx_pts, bx_pts)
        row = [np.kron(k_bb, eye)]
        if nz:
            k_b1 = gp.build_gram(kernel, bx_pts, [(t, FIRST) for t in z_times])
            k_b0 = gp.build_gram(kernel, bx_pts, [(t, VALUE) for t in z_times])
            row.append(np.kron(k_b1, eye) - np.kron(k_b0, mat.T))
        blocks.append(row)
    if nz:
        row = []
        if nb:
            row.append(blocks[0][1].T)
        k11 = _uniform_gram(kernel, z_times, z_times, FIRST, FIRST)
        k10 = _uniform_gram(kernel, z_times, z_times, FIRST, VALUE)
        k01 = _uniform_gram(kernel, z_times, z_times, VALUE, FIRST)
        k00 = _uniform_gram(kernel, z_times, z_times, VALUE, VALUE)
        row.append(np.kron(k11, eye) - np.kron(k10, mat.T)
                   - np.kron(k01, mat) + np.kron(k00, mat @ mat.T))
        blocks.append(row)
    if not blocks:
        raise ValueError("need at least one observation or boundary entry")
    k_yy = np.block(blocks)

    values = np.concatenate(
        [v for v in bx_values] + [v for v in z_values]
    ) if (nb or nz) else np.zeros(0)
    noise = np.concatenate([
        np.zeros(nb * dim),
        np.full(nz * dim, model.noise_var),
    ])
    k_yy = 0.5 * (k_yy + k_yy.T) + np.diag(noise)

    cross = []
    if nb:
        k_qb = gp.build_gram(kernel, [(t, VALUE) for t in q_times], bx_pts)
        cross.append(np.kron(k_qb, eye))
    if nz:
        k_q1 = _uniform_gram(kernel, q_times, z_times, VALUE, FIRST)
        k_q0 = _uniform_gram(kernel, q_times, z_times, VALUE, VALUE)
        cross.append(np.kron(k_q1, eye) - np.kron(k_q0, mat.T))
    k_qy = np.hstack(cross)
    k_qq = np.kron(_uniform_gram(kernel, q_times, q_times, VALUE, VALUE), eye)

    chol_l, _ = gp._chol_with_jitter(k_yy)
    alpha = cho_solve((chol_l, True), values)
    mean = k_qy @ alpha
    half = solve_triangular(chol_l, k_qy.T, lower=True)
    cov = k_qq - half.T @ half
    return GaussianBelief(mean, cov)


def belief_states(belief: GaussianBelief, n_times: int, dim: int):
    """Reshape a time-major belief into (mean, std) arrays of (n_times, dim)."""
    mean = belief.mean.reshape(n_times, dim)
    std = belief.std.reshape(n_times, dim)
    return mean, std
