"""Consensus ADMM over the measurement, system and consensus updates.

One iteration, in scaled form::

    x   <- prox_L(z - lam/rho)
    w   <- prox_{beta phi}(A(z) - alpha/rho)
    z   <- consensus(x + lam/rho, w + alpha/rho)
    lam <- lam + rho (x - z)
    alpha <- alpha + rho (w - A(z))

The x and w updates read only the previous z and duals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._backend import thread_count
from .consensus import ConsensusSolver
from .core import (
    AdmmConfig,
    ModmapError,
    NumericDomainError,
    ShapeError,
    TransitionModel,
    apply_transition,
    apply_transition_adjoint,
    objective,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmmState:
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        shape = np.shape(self.x)
        for name in ("w", "z", "lam", "alpha"):
            if np.shape(getattr(self, name)) != shape:
                raise ShapeError(
                    f"state field {name} has shape {np.shape(getattr(self, name))}, expected {shape}"
                )

    @classmethod
    def zeros(cls, K: int, N: int) -> "AdmmState":
        return cls(*(np.zeros((K, N)) for _ in range(5)))


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    r1: float
    r2: float
    s1: float
    s2: float
    eps1_pri: float
    eps2_pri: float
    eps1_dual: float
    eps2_dual: float
    objective: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    @property
    def converged(self) -> bool:
        return (
            self.r1 <= self.eps1_pri
            and self.r2 <= self.eps2_pri
            and self.s1 <= self.eps1_dual
            and self.s2 <= self.eps2_dual
        )


@dataclass(frozen=True)
class AdmmReport:
    records: tuple[IterationRecord, ...]
    converged: bool
    iterations: int
    state: AdmmState | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _with_iteration(exc: Exception, iteration: int) -> Exception:
    exc.iteration = iteration
    if exc.args and isinstance(exc.args[0], str) and "(iteration" not in exc.args[0]:
        exc.args = (f"{exc.args[0]} (iteration {iteration})",) + exc.args[1:]
    return exc


def step(state: AdmmState, meas, prior, solver: ConsensusSolver, cfg: AdmmConfig,
         threads: int = 1) -> AdmmState:
    """Advance one ADMM iteration."""
    rho, t = cfg.rho, solver.transition
    i = state.iteration + 1
    try:
        Az = apply_transition(state.z, t)
        x = meas.prox_all(state.z - state.lam / rho, rho, threads=threads)
        w = prior.prox(Az - state.alpha / rho, cfg.beta, rho)
        z = solver.solve(x + state.lam / rho, w + state.alpha / rho)
        lam = state.lam + rho * (x - z)
        alpha = state.alpha + rho * (w - apply_transition(z, t))
    except ModmapError as exc:
        raise _with_iteration(exc, i)
    for name, arr in (("x", x), ("w", w), ("z", z)):
        if not np.all(np.isfinite(arr)):
            raise NumericDomainError(f"{name} iterate became non-finite (iteration {i})")
    return AdmmState(x, w, z, lam, alpha, i)


def residuals(prev: AdmmState, nxt: AdmmState, t: TransitionModel, rho: float):
    """Frobenius norms of the primal residuals ``r1, r2`` and dual residuals ``s1, s2``."""
    r1 = np.linalg.norm(nxt.x - nxt.z)
    r2 = np.linalg.norm(nxt.w - apply_transition(nxt.z, t))
    s1 = rho * np.linalg.norm(apply_transition_adjoint(nxt.w - prev.w, t))
    s2 = rho * np.linalg.norm(nxt.z - prev.z)
    return float(r1), float(r2), float(s1), float(s2)


def thresholds(state: AdmmState, t: TransitionModel, eps_rel: float, eps_abs: float):
    """Stopping thresholds ``(eps1_pri, eps2_pri, eps1_dual, eps2_dual)``."""
    K, N = np.shape(state.x)
    base = eps_abs * np.sqrt(K * N)
    norm = np.linalg.norm
    e1p = eps_rel * max(norm(state.x), norm(state.z)) + base
    e2p = eps_rel * max(norm(state.w), norm(apply_transition(state.z, t))) + base
    e1d = eps_rel * norm(state.lam) + base
    e2d = eps_rel * norm(state.alpha) + base
    return float(e1p), float(e2p), float(e1d), float(e2d)


def run(meas, prior, solver: ConsensusSolver, cfg: AdmmConfig,
        init: AdmmState | None = None, threads: int | None = None,
        track_objective: bool = True):
    """Iterate until all four residuals are under threshold or ``max_iter``.

    Returns
    -------
    x_hat : ndarray, shape (K, N)
        The x iterate at termination.
    report : AdmmReport
        Full per-iteration trace and the final state.

    Raises
    ------
    ModmapError
        From any sub-update; the exception carries ``iteration`` and the
        partial ``report``.
    """
    K, N = solver.K, solver.N
    if meas.K != K or meas.N != N:
        raise ShapeError(f"measurement model is {meas.K}x{meas.N}, solver is {K}x{N}")
    t = solver.transition
    if threads is None:
        threads = thread_count()
    state = init if init is not None else AdmmState.zeros(K, N)
    if np.shape(state.x) != (K, N):
        raise ShapeError(f"initial state has shape {np.shape(state.x)}, expected {(K, N)}")
    meas.prepare(cfg.rho)

    records: list[IterationRecord] = []
    converged = False
    for _ in range(int(cfg.max_iter)):
        try:
            nxt = step(state, meas, prior, solver, cfg, threads=threads)
            obj = objective(nxt.x, meas, prior, t, cfg.beta) if track_objective else float("nan")
        except ModmapError as exc:
            exc.report = AdmmReport(tuple(records), False, len(records), state)
            if not hasattr(exc, "iteration"):
                _with_iteration(exc, state.iteration + 1)
            raise
        res = residuals(state, nxt, t, cfg.rho)
        eps = thresholds(nxt, t, cfg.eps_rel, cfg.eps_abs)
        rec = IterationRecord(nxt.iteration, *res, *eps, obj)
        records.append(rec)
        state = nxt
        if rec.converged:
            converged = True
            break
    logger.debug("admm stopped after %d iterations (converged=%s)", len(records), converged)
    report = AdmmReport(tuple(records), converged, len(records), state)
    return state.x.copy(), report
