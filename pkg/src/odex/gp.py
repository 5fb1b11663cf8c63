"""Gaussian process machinery used by every solver in the library.

Scalar squared-exponential GP with analytic derivative covariances up to
second order on either argument, exact conditioning on noisy value /
derivative observations, and seeded joint sampling.  Multivariate ODE
states are handled upstream by running one independent scalar GP per
state dimension on a shared time grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import SingularGram

# Relative jitter ladder.  Noiseless derivative observations at closely
# spaced knotpoints make the Gram matrix nearly singular, so conditioning
# always adds jitter scaled by the largest diagonal entry and escalates
# tenfold until the Cholesky factorization succeeds or the cap is hit.
JITTER_REL_MIN = 1e-10
JITTER_REL_MAX = 1e-4

LOG_2PI = float(np.log(2.0 * np.pi))


class DerivOrder(IntEnum):
    """How many times the latent function is differentiated at a point."""

    VALUE = 0
    FIRST = 1
    SECOND = 2


@dataclass(frozen=True)
class KernelConfig:
    """Squared-exponential covariance amplitude * exp(-(t - t')^2 / lengthscale^2).

    The defaults (lengthscale 1, amplitude 1) give plain exp(-(t - t')^2).
    """

    lengthscale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.lengthscale > 0.0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (self.amplitude > 0.0):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")


@dataclass(frozen=True)
class Observation:
    """One scalar observation of the latent function or a derivative of it."""

    time: float
    order: DerivOrder
    value: float
    noise_var: float = 0.0


class ObservationSet:
    """Immutable collection of observations with validated noise variances."""

    __slots__ = ("entries",)

    def __init__(self, entries: Iterable[Observation] = ()):
        entries = tuple(entries)
        for ob in entries:
            if ob.noise_var < 0.0:
                raise ValueError(f"noise_var must be >= 0, got {ob.noise_var}")
            DerivOrder(ob.order)
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    def points(self) -> list[tuple[float, DerivOrder]]:
        return [(ob.time, ob.order) for ob in self.entries]

    def values(self) -> np.ndarray:
        return np.array([ob.value for ob in self.entries], dtype=float)

    def noise(self) -> np.ndarray:
        return np.array([ob.noise_var for ob in self.entries], dtype=float)


class GaussianBelief:
    """Multivariate normal over a finite set of query points.

    The covariance is symmetrized on construction; means and covariances
    are stored as float arrays and never mutated afterwards.
    """

    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"mean/cov shape mismatch: {mean.shape} vs {cov.shape}"
            )
        self.mean = mean
        self.cov = 0.5 * (cov + cov.T)

    def __len__(self):
        return self.mean.size

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def marginal(self, idx: int) -> "GaussianBelief":
        """Single-coordinate marginal as a one-dimensional belief."""
        return GaussianBelief(self.mean[idx : idx + 1],
                              self.cov[idx : idx + 1, idx : idx + 1])

    def logpdf(self, x) -> float:
        """Log density of ``x`` under this belief (jittered Cholesky)."""
        x = np.asarray(x, dtype=float)
        chol_l, _ = _chol_with_jitter(self.cov)
        dev = solve_triangular(chol_l, x - self.mean, lower=True)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol_l))))
        return -0.5 * (self.mean.size * LOG_2PI + logdet + float(dev @ dev))


def _exp_derivatives(cfg: KernelConfig, r: np.ndarray) -> np.ndarray:
    """d^n/dr^n of amplitude*exp(-r^2/l^2) for n = 0..4, stacked on axis 0."""
    r = np.asarray(r, dtype=float)
    s = 1.0 / (cfg.lengthscale * cfg.lengthscale)
    base = cfg.amplitude * np.exp(-s * r * r)
    r2 = r * r
    d0 = base
    d1 = -2.0 * s * r * base
    d2 = (4.0 * s * s * r2 - 2.0 * s) * base
    d3 = (12.0 * s * s * r - 8.0 * s**3 * r * r2) * base
    d4 = (16.0 * s**4 * r2 * r2 - 48.0 * s**3 * r2 + 12.0 * s * s) * base
    return np.stack([d0, d1, d2, d3, d4])


def kernel_eval(cfg: KernelConfig, t: float, t_other: float,
                order_left: DerivOrder, order_right: DerivOrder) -> float:
    """Covariance between the ``order_left`` derivative at ``t`` and the
    ``order_right`` derivative at ``t_other``.

    Uses the closed form d^a/dt^a d^b/dt'^b C(t,t') = (-1)^b g^(a+b)(t-t')
    where g is the stationary kernel profile.
    """
    a = int(DerivOrder(order_left))
    b = int(DerivOrder(order_right))
    der = _exp_derivatives(cfg, np.array(float(t) - float(t_other)))
    sign = -1.0 if b % 2 else 1.0
    return float(sign * der[a + b])


def build_gram(cfg: KernelConfig,
               rows: Sequence[tuple[float, DerivOrder]],
               cols: Sequence[tuple[float, DerivOrder]]) -> np.ndarray:
    """Cross-covariance matrix between two lists of (time, order) points."""
    row_t = np.array([p[0] for p in rows], dtype=float)
    row_o = np.array([int(DerivOrder(p[1])) for p in rows])
    col_t = np.array([p[0] for p in cols], dtype=float)
    col_o = np.array([int(DerivOrder(p[1])) for p in cols])
    diff = row_t[:, None] - col_t[None, :]
    der = _exp_derivatives(cfg, diff)
    total = row_o[:, None] + col_o[None, :]
    sign = np.where(col_o[None, :] % 2 == 1, -1.0, 1.0)
    ii, jj = np.indices(diff.shape)
    return sign * der[total, ii, jj]


def _chol_with_jitter(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat`` plus escalating diagonal jitter.

    Returns (factor, jitter actually added).  Raises SingularGram once the
    relative jitter cap is exhausted.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = float(np.max(np.diag(mat)))
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    rel = JITTER_REL_MIN
    eye = np.eye(n)
    while rel <= JITTER_REL_MAX * (1.0 + 1e-12):
        jitter = rel * scale
        try:
            return cholesky(mat + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise SingularGram(
        f"Gram matrix ({n}x{n}) not positive definite even with relative "
        f"jitter {JITTER_REL_MAX:g}"
    )


def condition(cfg: KernelConfig,
              observations: ObservationSet | Iterable[Observation],
              queries: Sequence[tuple[float, DerivOrder]]) -> GaussianBelief:
    """Exact zero-mean GP conditioning on noisy observations.

    Posterior mean K_qy (K_yy + diag(noise) + jitter)^-1 y and covariance
    K_qq - K_qy (...)^-1 K_yq, all solves Cholesky-based.  An empty
    observation set returns the prior over the queries.
    """
    if not isinstance(observations, ObservationSet):
        observations = ObservationSet(observations)
    if len(queries) == 0:
        raise ValueError("queries must be non-empty")
    k_qq = build_gram(cfg, queries, queries)
    if len(observations) == 0:
        return GaussianBelief(np.zeros(len(queries)), k_qq)
    pts = observations.points()
    k_yy = build_gram(cfg, pts, pts)
    k_yy = 0.5 * (k_yy + k_yy.T) + np.diag(observations.noise())
    chol_l, _ = _chol_with_jitter(k_yy)
    k_qy = build_gram(cfg, queries, pts)
    alpha = cho_solve((chol_l, True), observations.values())
    mean = k_qy @ alpha
    half = solve_triangular(chol_l, k_qy.T, lower=True)
    cov = k_qq - half.T @ half
    return GaussianBelief(mean, cov)


def sample(belief: GaussianBelief, seed: int) -> np.ndarray:
    """One joint draw from the belief, fully determined by ``seed``."""
    chol_l, _ = _chol_with_jitter(belief.cov)
    z = np.random.default_rng(seed).standard_normal(belief.mean.size)
    return belief.mean + chol_l @ z


def derive_seed(*keys: int) -> int:
    """Deterministic child seed from a tuple of non-negative integers.

    Used to give every (ensemble member, step, dimension, role) its own
    stream so results do not depend on evaluation order.
    """
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])
