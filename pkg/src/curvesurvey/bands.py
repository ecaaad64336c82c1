"""Pointwise intervals and global confidence bands for the mean curve."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .estimate import FunctionalEstimate
from .population import TimeGrid

KINDS = ("global", "pointwise")


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def global_scale(alpha: float) -> float:
    """Band multiplier ``sqrt(2 log(2 / alpha))`` from the Gaussian supremum tail."""
    _check_alpha(alpha)
    return math.sqrt(2.0 * math.log(2.0 / alpha))


def pointwise_scale(alpha: float) -> float:
    """Two-sided standard normal quantile ``z_{1 - alpha/2}``.

    Uses the stdlib ``NormalDist.inv_cdf`` (Wichura's AS241 rational
    approximation, relative error around 1e-16).
    """
    _check_alpha(alpha)
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def scale(alpha: float, kind: str = "global") -> float:
    if kind == "global":
        return global_scale(alpha)
    if kind == "pointwise":
        return pointwise_scale(alpha)
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    grid: TimeGrid
    center: np.ndarray
    half_width: np.ndarray
    alpha: float
    kind: str
    n_clamped: int = 0

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width


def build_band(estimate: FunctionalEstimate, alpha: float, kind: str = "global") -> ConfidenceBand:
    """Band ``mean +/- scale * sqrt(var)`` around an estimate.

    Negative estimated variances are treated as zero for the width; the
    number of such grid points is kept in ``n_clamped``.
    """
    if estimate.variance_diag is None:
        raise ValueError("the estimate carries no variance function")
    var = np.asarray(estimate.variance_diag, dtype=float)
    n_neg = int(np.sum(var < 0))
    if n_neg:
        warnings.warn(f"{n_neg} negative variance estimates clamped to 0", stacklevel=2)
    half = scale(alpha, kind) * np.sqrt(np.maximum(var, 0.0))
    return ConfidenceBand(estimate.grid, np.asarray(estimate.mean), half, float(alpha), kind, n_neg)


def covered_points(center, half_width, truth) -> np.ndarray:
    """Per-grid-point coverage flags.

    Strict ``|center - truth| < half_width``, except that a zero-width point
    whose centre equals the truth counts as covered.
    """
    err = np.abs(np.asarray(center) - np.asarray(truth))
    return (err < half_width) | ((half_width == 0) & (err == 0))


def covers(band: ConfidenceBand, truth) -> bool:
    """True when the band contains ``truth`` at every grid point."""
    truth = np.asarray(truth, dtype=float)
    if truth.shape != band.center.shape:
        raise ValueError("truth must live on the band's grid")
    return bool(np.all(covered_points(band.center, band.half_width, truth)))
