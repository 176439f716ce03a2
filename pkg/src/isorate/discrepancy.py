"""Distance between observed premiums and a loaded model fit.

The core summary is a weighted root-mean-square error between observed
commercial premiums and the loading link applied to model pure premiums.
Two one-sided regularizers penalize observations whose implied loss ratio
(pure premium over commercial premium) leaves a plausibility corridor;
they act on the raw pure premiums, before any loading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Corridor",
    "DistanceWeights",
    "rmse",
    "reg_low",
    "reg_high",
    "total_distance",
    "distance_breakdown",
    "DistanceBreakdown",
]


@dataclass(frozen=True)
class Corridor:
    """Loss-ratio plausibility band ``0 < low < high``.

    An observation with commercial premium t and pure premium p has implied
    loss ratio p / t; the corridor asks for low <= p / t <= high, i.e.
    p / high <= t <= p / low.
    """

    low: float
    high: float

    def __post_init__(self):
        if not (0.0 < self.low < self.high) or not np.isfinite(self.high):
            raise ValueError(
                f"corridor must satisfy 0 < low < high < inf, got ({self.low}, {self.high})"
            )


@dataclass(frozen=True)
class DistanceWeights:
    """Per-observation weights carrying their own normalization.

    The default gives every observation weight 1/n, which turns the weighted
    sums below into plain means.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)) or not np.all(v > 0):
            raise ValueError("weights must be finite and strictly positive")

    @classmethod
    def uniform(cls, n: int) -> "DistanceWeights":
        if n < 1:
            raise ValueError("need at least one observation")
        return cls(np.full(n, 1.0 / n))


def _weights_array(weights, n: int) -> np.ndarray:
    if weights is None:
        weights = DistanceWeights.uniform(n)
    if isinstance(weights, DistanceWeights):
        w = weights.values
    else:
        w = DistanceWeights(np.asarray(weights, dtype=float)).values
    if w.size != n:
        raise ValueError(f"weights have length {w.size}, expected {n}")
    return w


def rmse(observed, fitted, weights=None) -> float:
    """Square root of the weighted sum of squared errors."""
    observed = np.asarray(observed, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if observed.shape != fitted.shape or observed.ndim != 1:
        raise ValueError("observed and fitted must be 1-d arrays of equal length")
    w = _weights_array(weights, observed.size)
    return float(np.sqrt(np.dot(w, (observed - fitted) ** 2)))


def reg_low(commercial, pure, corridor: Corridor, weights=None) -> float:
    """Penalty for loss ratios below the corridor floor.

    The implied loss ratio p / t drops below ``low`` exactly when the
    commercial premium t exceeds p / low; the excess is penalized in
    weighted root-mean-square form.
    """
    commercial = np.asarray(commercial, dtype=float)
    pure = np.asarray(pure, dtype=float)
    w = _weights_array(weights, commercial.size)
    excess = np.maximum(commercial - pure / corridor.low, 0.0)
    return float(np.sqrt(np.dot(w, excess**2)))


def reg_high(commercial, pure, corridor: Corridor, weights=None) -> float:
    """Penalty for loss ratios above the corridor ceiling.

    The implied loss ratio p / t exceeds ``high`` exactly when the
    commercial premium t falls below p / high; the shortfall is penalized
    in weighted root-mean-square form.
    """
    commercial = np.asarray(commercial, dtype=float)
    pure = np.asarray(pure, dtype=float)
    w = _weights_array(weights, commercial.size)
    shortfall = np.maximum(pure / corridor.high - commercial, 0.0)
    return float(np.sqrt(np.dot(w, shortfall**2)))


@dataclass(frozen=True)
class DistanceBreakdown:
    """Additive components of one distance evaluation."""

    rmse: float
    reg_low: float
    reg_high: float

    @property
    def total(self) -> float:
        return self.rmse + self.reg_low + self.reg_high


def distance_breakdown(
    commercial,
    pure,
    loaded_fit,
    corridor: Corridor | None = None,
    weights=None,
) -> DistanceBreakdown:
    """Fit error plus corridor penalties, reported component by component.

    ``loaded_fit`` is the loading link applied to the pure premiums; the
    corridor penalties use the raw ``pure`` values. ``corridor=None``
    disables both regularizers.
    """
    commercial = np.asarray(commercial, dtype=float)
    pure = np.asarray(pure, dtype=float)
    loaded_fit = np.asarray(loaded_fit, dtype=float)
    if not (commercial.shape == pure.shape == loaded_fit.shape):
        raise ValueError("commercial, pure, and loaded_fit must share one shape")
    err = rmse(commercial, loaded_fit, weights)
    if corridor is None:
        return DistanceBreakdown(rmse=err, reg_low=0.0, reg_high=0.0)
    return DistanceBreakdown(
        rmse=err,
        reg_low=reg_low(commercial, pure, corridor, weights),
        reg_high=reg_high(commercial, pure, corridor, weights),
    )


def total_distance(
    commercial,
    pure,
    loaded_fit,
    corridor: Corridor | None = None,
    weights=None,
) -> float:
    """Scalar discrepancy: rmse + reg_low + reg_high."""
    return distance_breakdown(commercial, pure, loaded_fit, corridor, weights).total
