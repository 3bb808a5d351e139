"""Spectrotemporal estimation: Fourier windows, simulated signals, power maps.

Coefficients are real (rectangular form). Column ``k < K/2`` of ``F_n`` is a
cosine at ``k`` cycles per ``K`` samples and column ``K/2 + k`` a sine at
``K/2 + k`` cycles, which aliases to a sine at ``K/2 - k`` cycles. Column
``K/2`` is therefore identically zero on the sample grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..core import ConfigError, TransitionModel
from ..measurement import LinearGaussianMeasurement

SIGNALS = ("two-tone", "change-point")


@dataclass(frozen=True)
class SpectroConfig:
    K: int = 250
    P: int = 30
    fs: float = 125.0
    N: int = 250
    beta: float = 3000.0
    rho: float = 1000.0
    max_iter: int = 5000
    prior: str = "group"
    signal: str = "two-tone"
    f0: float = 0.04
    f1: float = 10.0
    f2: float = 11.0
    tone_hz: float = 10.0
    amplitude: float = 3.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if int(self.K) != self.K or self.K < 2 or self.K % 2:
            errors.append(f"K must be a positive even integer, got {self.K}")
        if int(self.P) != self.P or self.P < 1:
            errors.append(f"P must be an integer >= 1, got {self.P}")
        if int(self.N) != self.N or self.N < 1:
            errors.append(f"N must be an integer >= 1, got {self.N}")
        if not self.fs > 0:
            errors.append(f"fs must be > 0, got {self.fs}")
        if self.prior not in ("group", "nuclear"):
            errors.append(f"prior must be 'group' or 'nuclear', got {self.prior!r}")
        if self.signal not in SIGNALS:
            errors.append(f"signal must be one of {SIGNALS}, got {self.signal!r}")
        if not self.beta >= 0:
            errors.append(f"beta must be >= 0, got {self.beta}")
        if not self.rho > 0:
            errors.append(f"rho must be > 0, got {self.rho}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            errors.append(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if self.noise_sd < 0:
            errors.append(f"noise_sd must be >= 0, got {self.noise_sd}")
        return errors

    @property
    def M(self) -> int:
        return int(self.N) * int(self.P)

    def replace(self, **changes) -> "SpectroConfig":
        return SpectroConfig(**{**asdict(self), **changes})

    @property
    def duration(self) -> float:
        return self.M / self.fs

    @property
    def transition(self) -> TransitionModel:
        return TransitionModel.identity(int(self.K))


def lrsd_config(**changes) -> SpectroConfig:
    """Desk-scale low-rank preset: a 10 Hz tone switching on halfway through 60 s at 64 Hz."""
    base = dict(K=128, P=16, fs=64.0, N=240, beta=4000.0, rho=300.0,
                prior="nuclear", signal="change-point")
    return SpectroConfig(**{**base, **changes})


def fourier_matrices(K: int, P: int, N: int) -> np.ndarray:
    """Stack of inverse Fourier windows, shape ``(N, P, K)``."""
    half = K // 2
    t = (np.arange(N)[:, None] * P + np.arange(1, P + 1)[None, :]).astype(float)
    k = np.arange(half, dtype=float)
    F = np.empty((N, P, K))
    F[:, :, :half] = np.cos(2 * np.pi * t[:, :, None] * k / K)
    F[:, :, half:] = np.sin(2 * np.pi * t[:, :, None] * (k + half) / K)
    return F


def fourier_measurement(K: int, y, rho: float | None = None) -> LinearGaussianMeasurement:
    """Windowed Fourier model for ``y`` of shape ``(P, N)``.

    ``F_n`` depends on ``n`` only through ``nP mod K``, so only
    ``K / gcd(P, K)`` distinct windows are stored.
    """
    y = np.asarray(y, dtype=float)
    P, N = y.shape
    period = min(K // math.gcd(P, K), N)
    return LinearGaussianMeasurement(
        fourier_matrices(K, P, period), y, rho=rho, index=np.arange(N) % period
    )


def build_fourier_windows(cfg: SpectroConfig, y, rho: float | None = None) -> LinearGaussianMeasurement:
    return fourier_measurement(cfg.K, y, rho=rho)


def windows(series, P: int) -> np.ndarray:
    """Reshape a length ``N*P`` series to ``(P, N)``, one window per column."""
    series = np.asarray(series, dtype=float)
    if series.size % P:
        raise ConfigError(f"series length {series.size} is not a multiple of P={P}")
    return series.reshape(-1, P).T.copy()


def spectro_series(cfg: SpectroConfig, noise: bool = True) -> np.ndarray:
    """Two-tone test series of length ``M``; sample ``m`` sits at ``m / fs`` seconds."""
    M = cfg.M
    m = np.arange(1, M + 1, dtype=float)
    sec = m / cfg.fs
    y = (
        10.0 * np.cos(2 * np.pi * cfg.f0 * sec) ** 8 * np.sin(2 * np.pi * cfg.f1 * sec)
        + 10.0 * np.exp(4.0 * (m - M) / M) * np.cos(2 * np.pi * cfg.f2 * sec)
    )
    if noise and cfg.noise_sd > 0:
        y = y + cfg.noise_sd * np.random.default_rng(cfg.seed).standard_normal(M)
    return y


def simulate_spectro_signal(cfg: SpectroConfig, noise: bool = True) -> np.ndarray:
    """Windowed observations ``(P, N)`` of the configured test signal."""
    if cfg.signal == "change-point":
        series = change_point_series(cfg.fs, cfg.duration, freq=cfg.tone_hz,
                                     amplitude=cfg.amplitude,
                                     noise_sd=cfg.noise_sd if noise else 0.0, seed=cfg.seed)
    else:
        series = spectro_series(cfg, noise=noise)
    return windows(series, cfg.P)


def change_point_series(fs: float, duration: float, freq: float = 10.0,
                        amplitude: float = 3.0, noise_sd: float = 1.0,
                        seed: int = 0) -> np.ndarray:
    """Unit-noise series with a tone switched on at the midpoint."""
    M = int(round(fs * duration))
    sec = np.arange(1, M + 1) / fs
    y = np.where(sec > duration / 2, amplitude * np.sin(2 * np.pi * freq * sec), 0.0)
    if noise_sd > 0:
        y = y + noise_sd * np.random.default_rng(seed).standard_normal(M)
    return y


def bin_frequencies(K: int, fs: float) -> np.ndarray:
    """Frequency in Hz of each power bin ``j = 0 .. K/2 - 1``."""
    return np.arange(K // 2) * fs / K


def power(x) -> np.ndarray:
    """Per-bin power ``(K/2, N)``: cosine and same-frequency sine squared.

    The sine at ``j`` cycles lives in column ``K - j``; bin 0 has no sine.
    """
    x = np.asarray(x, dtype=float)
    K = x.shape[0]
    half = K // 2
    pw = x[:half] ** 2
    j = np.arange(1, half)
    pw[1:] += x[K - j] ** 2
    return pw
