"""Reference MAP solvers for small problems, independent of the ADMM path.

Quadratic problems (linear-Gaussian measurements with a Gaussian prior, or
no prior) are solved from the assembled dense normal equations. Problems with
a separable prior (l1, Gaussian) and any convex measurement model are solved
by coordinate descent over the innovations ``w``; each coordinate is
minimised by nested grid refinement.
"""

from __future__ import annotations

import numpy as np

from ..core import TransitionModel
from ..measurement import LinearGaussianMeasurement
from ..priors import GaussianPrior, L1Prior


def transition_matrix(t: TransitionModel, N: int) -> np.ndarray:
    """Dense ``G`` with ``vec(A(x)) = G vec(x)`` in time-major order."""
    K = t.K
    G = np.eye(K * N)
    for n in range(1, N):
        G[n * K:(n + 1) * K, (n - 1) * K:n * K] = -t.D
    return G


def _time_major(x: np.ndarray) -> np.ndarray:
    return x.T.reshape(-1)


def _from_time_major(v: np.ndarray, K: int, N: int) -> np.ndarray:
    return v.reshape(N, K).T.copy()


def quadratic_map(meas: LinearGaussianMeasurement, prior: GaussianPrior | None,
                  t: TransitionModel, beta: float) -> np.ndarray:
    """Exact minimiser of ``sum ||y_n - F_n x_n||^2 + beta * phi_gauss(A(x))``."""
    K, N, P = meas.K, meas.N, meas.P
    blocks = np.zeros((N * P, N * K))
    for n in range(N):
        blocks[n * P:(n + 1) * P, n * K:(n + 1) * K] = meas._F(n)
    H = 2.0 * blocks.T @ blocks
    g = 2.0 * blocks.T @ _time_major(meas.y)
    if prior is not None and beta > 0:
        G = transition_matrix(t, N)
        prec = beta / prior.sigma_v**2
        H = H + prec * G.T @ G
        g = g + prec * G.T @ np.full(N * K, prior.gamma)
    sol, *_ = np.linalg.lstsq(H, g, rcond=None)
    return _from_time_major(sol, K, N)


def _refine_1d(f, center: float, radius: float, tol: float, points: int = 41) -> float:
    """Minimise a convex scalar function by repeatedly zooming a uniform grid."""
    lo, hi = center - radius, center + radius
    best = center
    while True:
        grid = np.linspace(lo, hi, points)
        vals = f(grid)
        i = int(np.argmin(vals))
        best = grid[i]
        # minimum on the boundary: the interval missed it, slide outward
        if i == 0 or i == points - 1:
            width = hi - lo
            lo, hi = best - width, best + width
            continue
        spacing = grid[1] - grid[0]
        if spacing <= tol:
            return float(best)
        lo, hi = best - 2 * spacing, best + 2 * spacing


def coordinate_map(meas, prior, t: TransitionModel, beta: float, tol: float = 1e-9,
                   radius: float = 10.0, max_sweeps: int = 5000, x0=None) -> np.ndarray:
    """MAP estimate by coordinate descent on ``w`` with grid line searches.

    Requires a prior that is separable over entries so that coordinate
    descent reaches the global minimum.
    """
    if not isinstance(prior, (L1Prior, GaussianPrior)) and beta > 0:
        raise NotImplementedError(f"coordinate oracle needs a separable prior, got {type(prior).__name__}")
    K, N = meas.K, meas.N
    G = transition_matrix(t, N)
    Ginv = np.linalg.inv(G)
    w = G @ _time_major(np.zeros((K, N)) if x0 is None else np.asarray(x0, dtype=float))

    def total(W):
        X = (W @ Ginv.T).reshape(-1, N, K).transpose(0, 2, 1)
        vals = meas.nll_batch(X)
        if beta > 0:
            Wk = W.reshape(-1, N, K).transpose(0, 2, 1)
            vals = vals + beta * np.array([prior.phi(wk) for wk in Wk])
        return vals

    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(K * N):
            def along(grid):
                W = np.repeat(w[np.newaxis, :], grid.size, axis=0)
                W[:, i] = grid
                return total(W)

            new = _refine_1d(along, w[i], radius, tol)
            # never accept a grid point worse than the incumbent
            if along(np.array([w[i]]))[0] < along(np.array([new]))[0]:
                new = w[i]
            moved = max(moved, abs(new - w[i]))
            w[i] = new
        if moved <= tol:
            break
    return _from_time_major(Ginv @ w, K, N)


def dense_map_oracle(meas, prior, t: TransitionModel, beta: float, **kwargs) -> np.ndarray:
    """Ground-truth MAP estimate for small problems."""
    if isinstance(meas, LinearGaussianMeasurement) and (beta == 0 or isinstance(prior, GaussianPrior)):
        return quadratic_map(meas, prior, t, beta)
    return coordinate_map(meas, prior, t, beta, **kwargs)
