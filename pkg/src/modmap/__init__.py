"""Modular MAP estimation of latent time series by consensus ADMM."""

from ._backend import NAME as backend
from .admm import AdmmReport, AdmmState, residuals, run, step, thresholds
from .consensus import ConsensusSolver
from .core import (
    AdmmConfig,
    ConfigError,
    ModmapError,
    NumericDomainError,
    ShapeError,
    SolverError,
    TransitionModel,
    apply_transition,
    apply_transition_adjoint,
    as_series,
    invert_transition,
    objective,
)
from .measurement import (
    LearningMeasurement,
    LearningObservations,
    LinearGaussianMeasurement,
    MeasurementModel,
)
from .priors import GaussianPrior, GroupPrior, L1Prior, NuclearPrior, SystemPrior

__version__ = "0.1.0"
