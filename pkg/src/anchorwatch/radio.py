"""Range measurement models.

Every model turns a true geometric distance into a measured one.  Signal
strength, time of arrival and time difference of arrival all reduce to
"distance plus noise" here; only the noise shape differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT = "exact"
GAUSSIAN = "gaussian_additive"
SHADOWING = "log_normal_shadowing"
KINDS = (EXACT, GAUSSIAN, SHADOWING)


@dataclass(frozen=True)
class NoiseModel:
    """``sigma`` is in meters for the additive model and in dB for shadowing."""

    kind: str = GAUSSIAN
    sigma: float = 0.5
    path_loss_exponent: float = 2.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if not 1.5 <= self.path_loss_exponent <= 6.0:
            raise ValueError("path_loss_exponent must lie in [1.5, 6.0]")
        if not self.reference_distance > 0:
            raise ValueError("reference_distance must be > 0")

    @classmethod
    def exact(cls) -> "NoiseModel":
        return cls(kind=EXACT, sigma=0.0)

    @property
    def is_exact(self) -> bool:
        return self.kind == EXACT or self.sigma == 0.0


def true_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def measure_range(d_true: float, model: NoiseModel, rng: np.random.Generator) -> float:
    if model.kind == EXACT:
        return float(d_true)
    if model.kind == GAUSSIAN:
        return max(0.0, d_true + model.sigma * rng.standard_normal())
    return float(_shadowed(np.float64(d_true), model, rng.standard_normal()))


def measure_ranges(d_true, model: NoiseModel, rng: np.random.Generator, size=None) -> np.ndarray:
    """Vectorized ``measure_range``.

    ``d_true`` broadcasts against ``size``; each output element gets an
    independent draw.
    """
    d = np.asarray(d_true, dtype=float)
    shape = d.shape if size is None else size
    if model.kind == EXACT:
        return np.broadcast_to(d, shape).astype(float)
    z = rng.standard_normal(shape)
    if model.kind == GAUSSIAN:
        return np.maximum(0.0, d + model.sigma * z)
    return _shadowed(d, model, z)


def _shadowed(d, model: NoiseModel, z):
    # received power P = P0 - 10 n log10(d / d0) + X, X ~ N(0, sigma_dB^2);
    # inverting the path-loss law at P gives d * 10^(-X / (10 n))
    d0 = model.reference_distance
    est = np.maximum(d, d0) * np.power(10.0, -model.sigma * z / (10.0 * model.path_loss_exponent))
    return np.maximum(est, d0)


def range_sigma(d_true: float, model: NoiseModel) -> float:
    """Approximate standard deviation of a measurement at ``d_true``."""
    if model.is_exact:
        return 0.0
    if model.kind == GAUSSIAN:
        return model.sigma
    return max(d_true, model.reference_distance) * math.log(10.0) * model.sigma / (
        10.0 * model.path_loss_exponent)
