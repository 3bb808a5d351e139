"""Simulator for the state-space model of learning.

The latent cognitive state is scalar. Two dynamics are available: Gaussian
(``x_n = kappa x_{n-1} + gamma + v_n``) and sparse variations
(``x_n = x_{n-1} + v_n`` with ``v_n = 0`` w.p. ``p``, else ``sigma * U_n``,
``U_n ~ chi^2_2``). Each trial emits a success bit, a log reaction time and
a binned spike train.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from ..core import ConfigError, TransitionModel
from ..measurement import LearningObservations
from ..priors import GaussianPrior


@dataclass(frozen=True)
class LearningSimConfig:
    N: int = 25
    kappa: float = 0.98
    gamma: float = 0.05
    sigma_v: float = 0.2
    nu: float = -1.0
    eta: float = 1.2
    psi: float = 0.5
    omega: float = -0.4
    sigma_r: float = 0.3
    xi: float = 2.3
    a: float = 1.0
    c: tuple = (-5.0, -2.0)
    dt: float = 0.001
    J: int = 1000
    sparse: bool = False
    p: float = 0.9
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if int(self.N) != self.N or self.N < 1:
            errors.append(f"N must be an integer >= 1, got {self.N}")
        if not 0.0 <= self.kappa <= 1.0:
            errors.append(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.gamma < 0:
            errors.append(f"gamma must be >= 0, got {self.gamma}")
        if self.sigma_v < 0:
            errors.append(f"sigma_v must be >= 0, got {self.sigma_v}")
        if self.omega > 0:
            errors.append(f"omega must be <= 0, got {self.omega}")
        if not self.sigma_r > 0:
            errors.append(f"sigma_r must be > 0, got {self.sigma_r}")
        if not self.dt > 0:
            errors.append(f"dt must be > 0, got {self.dt}")
        if int(self.J) != self.J or self.J < 0:
            errors.append(f"J must be an integer >= 0, got {self.J}")
        if not 0.0 <= self.p <= 1.0:
            errors.append(f"p must lie in [0, 1], got {self.p}")
        if not self.sigma > 0:
            errors.append(f"sigma must be > 0, got {self.sigma}")
        return errors

    def replace(self, **changes) -> "LearningSimConfig":
        return LearningSimConfig(**{**asdict(self), **changes})

    @property
    def transition(self) -> TransitionModel:
        return TransitionModel(1.0 if self.sparse else self.kappa)

    def gaussian_prior(self) -> GaussianPrior:
        """Gaussian prior on the innovations.

        Sparse dynamics get the usual zero-mean approximation with the jump
        variance ``Var(sigma * U) = 4 sigma^2``.
        """
        if not self.sparse:
            return GaussianPrior(self.gamma, self.sigma_v)
        return GaussianPrior(0.0, 2.0 * self.sigma)


class LearningSimulation(NamedTuple):
    x_true: np.ndarray
    observations: LearningObservations
    clipped: int


def _logistic(u):
    return 1.0 / (1.0 + np.exp(-u))


def simulate_learning(cfg: LearningSimConfig) -> LearningSimulation:
    """Draw a latent trajectory and its three observation streams.

    Spike bins use Bernoulli(min(Lambda * dt, 1)); ``clipped`` counts the
    bins where ``Lambda * dt`` exceeded one.
    """
    rng = np.random.default_rng(cfg.seed)
    N, J = int(cfg.N), int(cfg.J)

    if cfg.sparse:
        e = rng.standard_normal((N, 2))
        u = np.sum(e * e, axis=1)
        jump = rng.random(N) >= cfg.p
        v = np.where(jump, cfg.sigma * u, 0.0)
        x = np.cumsum(v)
    else:
        v = cfg.gamma + cfg.sigma_v * rng.standard_normal(N)
        x = np.empty(N)
        prev = 0.0
        for n in range(N):
            prev = cfg.kappa * prev + v[n]
            x[n] = prev

    b = (rng.random(N) < _logistic(cfg.nu + cfg.eta * x)).astype(float)
    r = cfg.psi + cfg.omega * x + cfg.sigma_r * rng.standard_normal(N)

    spikes = np.zeros((N, J))
    uniforms = rng.random((N, J))
    clipped = 0
    M = len(cfg.c)
    for n in range(N):
        base = cfg.xi + cfg.a * x[n]
        for j in range(J):
            hist = 0.0
            for m in range(1, min(M, j) + 1):
                hist += cfg.c[m - 1] * spikes[n, j - m]
            prob = math.exp(base + hist) * cfg.dt
            if prob > 1.0:
                clipped += 1
                prob = 1.0
            spikes[n, j] = 1.0 if uniforms[n, j] < prob else 0.0

    obs = LearningObservations(
        b=b, r=r, spikes=spikes,
        nu=cfg.nu, eta=cfg.eta, psi=cfg.psi, omega=cfg.omega, sigma_r=cfg.sigma_r,
        xi=cfg.xi, a=cfg.a, c=cfg.c, dt=cfg.dt,
    )
    return LearningSimulation(x[np.newaxis, :], obs, clipped)
