"""Simulators, model builders, metrics and reference solvers."""

import numpy as np

from ..core import ShapeError
from .learning import LearningSimConfig, LearningSimulation, simulate_learning
from .oracle import coordinate_map, dense_map_oracle, quadratic_map, transition_matrix
from .spectro import (
    SpectroConfig,
    bin_frequencies,
    build_fourier_windows,
    change_point_series,
    fourier_matrices,
    fourier_measurement,
    lrsd_config,
    power,
    simulate_spectro_signal,
    spectro_series,
    windows,
)


def rmse(x_hat, x_true) -> float:
    """``||x_hat - x_true||_F / sqrt(N)``."""
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    x_true = np.atleast_2d(np.asarray(x_true, dtype=float))
    if x_hat.shape != x_true.shape:
        raise ShapeError(f"shape mismatch: {x_hat.shape} vs {x_true.shape}")
    return float(np.linalg.norm(x_hat - x_true) / np.sqrt(x_hat.shape[1]))
