"""Scalar random-walk Kalman filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .common import like, values_of


@dataclass(frozen=True)
class KalmanConfig:
    """x_k = x_{k-1} + w (var Q), z_k = x_k + v (var R).

    ``initial_state=None`` starts from each trace's first sample and
    ``initial_variance=None`` uses R.
    """

    process_noise: float = 0.0175
    measurement_noise: float = 0.06
    initial_state: float | None = None
    initial_variance: float | None = None

    def __post_init__(self):
        if self.process_noise < 0:
            raise ConfigurationError(f"process noise Q must be >= 0, got {self.process_noise}")
        if not self.measurement_noise > 0:
            raise ConfigurationError(f"measurement noise R must be > 0, got {self.measurement_noise}")
        if self.initial_variance is not None and self.initial_variance < 0:
            raise ConfigurationError("initial variance P0 must be >= 0")


def kalman_gains(n: int, cfg: KalmanConfig) -> tuple[np.ndarray, np.ndarray]:
    """Gain K_k and posterior variance P_k for k = 1..n.

    The variance recursion does not depend on the measurements, so it is
    shared by every trace filtered with the same configuration.
    """
    q, r = cfg.process_noise, cfg.measurement_noise
    p = r if cfg.initial_variance is None else cfg.initial_variance
    gains = np.empty(n)
    variances = np.empty(n)
    for k in range(n):
        prior = p + q
        gain = prior / (prior + r)
        p = (1.0 - gain) * prior
        gains[k] = gain
        variances[k] = p
    return gains, variances


def kalman_filter(trace, cfg: KalmanConfig = KalmanConfig()):
    """Filtered state sequence for a Trace, a TraceSet (row-wise) or an array."""
    z = np.asarray(values_of(trace), dtype=np.float64)
    gains, _ = kalman_gains(z.shape[-1], cfg)
    if cfg.initial_state is None:
        x = z[..., 0].copy()
    else:
        x = np.full(z.shape[:-1], float(cfg.initial_state))
    out = np.empty_like(z)
    for k in range(z.shape[-1]):
        x = x + gains[k] * (z[..., k] - x)
        out[..., k] = x
    return like(trace, out)
