"""Horvitz-Thompson estimation of the mean curve and its covariance function.

Every covariance routine comes in two evaluations:

* ``method="pairs"`` is the generic double sum over unit pairs weighted by
  ``Delta_kl`` (and ``1 / pi_kl`` for the estimator). It works for any design
  exposing ``pi2_matrix``/``delta_matrix`` and costs O(n^2 d).
* ``method="auto"`` uses the closed form available for (stratified) SRSWOR,
  built from within-stratum centred sums of squares. Same value, O(n d),
  and free of the cancellation the raw double sum suffers when curve levels
  are large compared with their spread.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import Sample, SamplingDesign
from .errors import DegenerateStratumError, VarianceNotEstimableError
from .population import CurvePopulation, TimeGrid, interpolate, trapezoid_integral


@dataclass(frozen=True, eq=False)
class CovarianceFunction:
    """Covariance of the mean-curve estimator on the grid (true or estimated)."""

    grid: TimeGrid
    variance_diag: np.ndarray
    covariance: Optional[np.ndarray] = None

    @property
    def n_negative(self) -> int:
        """Grid points where the (estimated) variance is negative."""
        return int(np.sum(self.variance_diag < 0))

    def integral(self) -> float:
        """Trapezoid integral of the variance function over the grid."""
        return trapezoid_integral(self.variance_diag, self.grid)


@dataclass(frozen=True, eq=False)
class FunctionalEstimate:
    """Estimated mean curve with its estimated variance function."""

    grid: TimeGrid
    mean: np.ndarray
    variance_diag: np.ndarray
    covariance: Optional[np.ndarray] = None
    sample: Optional[Sample] = None

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.variance_diag < 0))

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.variance_diag, 0.0))


def _check(pop: CurvePopulation, design: SamplingDesign):
    if design.N != pop.N:
        raise ValueError(f"design is over {design.N} units, population has {pop.N}")


def _pi(design, idx):
    """Inclusion probabilities of the units ``idx`` only."""
    return design.stratum_pi[design.labels[idx] - 1]


def ht_mean(pop: CurvePopulation, sample: Sample) -> np.ndarray:
    """Horvitz-Thompson mean curve on the grid points."""
    _check(pop, sample.design)
    idx = sample.indices
    w = 1.0 / _pi(sample.design, idx)
    return np.sum(pop.values[idx] * w[:, None], axis=0) / pop.N


def ht_mean_at(pop: CurvePopulation, sample: Sample, t):
    """Horvitz-Thompson mean of the linearly interpolated sampled curves at ``t``."""
    _check(pop, sample.design)
    idx = sample.indices
    w = 1.0 / _pi(sample.design, idx)
    y = np.asarray(interpolate(pop.values[idx], pop.grid, t))  # shape (n, *t.shape)
    out = np.tensordot(w, y, axes=(0, 0)) / pop.N
    return float(out) if np.ndim(out) == 0 else out


def _pair_sum(Z, W, diagonal_only):
    """``Z^T W Z`` (or its diagonal) for symmetric ``W``."""
    if diagonal_only:
        return np.sum(Z * (W @ Z), axis=0), None
    full = Z.T @ W @ Z
    full = (full + full.T) / 2.0
    return np.diag(full).copy(), full


def _stratum_scatter(Y, diagonal_only):
    """Sums of squares (diagonal) and cross-products about the column means."""
    centred = Y - Y.mean(axis=0)
    if diagonal_only:
        return np.sum(centred * centred, axis=0), None
    cp = centred.T @ centred
    return np.diag(cp).copy(), (cp + cp.T) / 2.0


def _closed_form(grid, blocks, N, d, diagonal_only):
    """Sum of ``coef_h * scatter_h`` over strata, divided by ``N^2``."""
    diag = np.zeros(d)
    full = None if diagonal_only else np.zeros((d, d))
    for coef, Y in blocks:
        if coef == 0.0:
            continue
        sd, sf = _stratum_scatter(Y, diagonal_only)
        diag += coef * sd
        if full is not None:
            full += coef * sf
    diag /= N**2
    if full is not None:
        full /= N**2
        # keep the stored diagonal identical to variance_diag
        np.fill_diagonal(full, diag)
    return CovarianceFunction(grid, diag, full)


# -- true covariance ---------------------------------------------------------


def _true_blocks(pop, design, strict):
    blocks = []
    for h in range(1, design.H + 1):
        N_h, n_h = int(design.N_h[h - 1]), int(design.n_h[h - 1])
        if N_h < 2:
            if strict:
                raise DegenerateStratumError(f"stratum {h} has N_h = {N_h} < 2")
            continue  # a single-unit stratum is always fully sampled
        # N_h (N_h - n_h) / n_h * gamma~_h, and gamma~_h = scatter / (N_h - 1)
        coef = N_h * (N_h - n_h) / n_h / (N_h - 1)
        blocks.append((coef, pop.values[design.members(h)]))
    return blocks


def stratified_true_covariance(
    pop: CurvePopulation, design: SamplingDesign, diagonal_only: bool = True
) -> CovarianceFunction:
    """Closed-form covariance of the stratified mean-curve estimator.

    ``gamma(s, t) = N^-2 sum_h N_h (N_h - n_h) / n_h * gamma~_h(s, t)`` where
    ``gamma~_h`` is the within-stratum covariance with divisor ``N_h - 1``.
    """
    _check(pop, design)
    return _closed_form(pop.grid, _true_blocks(pop, design, True), pop.N, pop.d, diagonal_only)


def true_covariance(
    pop: CurvePopulation,
    design: SamplingDesign,
    diagonal_only: bool = True,
    method: str = "auto",
) -> CovarianceFunction:
    """Exact design covariance of the Horvitz-Thompson mean curve."""
    _check(pop, design)
    if method == "auto":
        blocks = _true_blocks(pop, design, False)
        return _closed_form(pop.grid, blocks, pop.N, pop.d, diagonal_only)
    if method != "pairs":
        raise ValueError(f"unknown method {method!r}")
    Z = pop.values / design.pi1_all()[:, None]
    diag, full = _pair_sum(Z, design.delta_matrix(), diagonal_only)
    N2 = pop.N**2
    return CovarianceFunction(pop.grid, diag / N2, None if full is None else full / N2)


# -- estimated covariance ----------------------------------------------------


def _estimate_blocks(pop, sample, strict):
    design = sample.design
    lab = design.labels[sample.indices]
    blocks = []
    for h in range(1, design.H + 1):
        N_h, n_h = int(design.N_h[h - 1]), int(design.n_h[h - 1])
        if n_h < 2:
            if strict or N_h > 1:
                raise VarianceNotEstimableError(
                    f"stratum {h} has n_h = {n_h}; its variance cannot be estimated"
                )
            continue
        coef = N_h * (N_h - n_h) / n_h / (n_h - 1)
        blocks.append((coef, pop.values[sample.indices[lab == h]]))
    return blocks


def stratified_variance_estimate(
    pop: CurvePopulation, sample: Sample, diagonal_only: bool = True
) -> CovarianceFunction:
    """Stratified covariance estimate from within-sample stratum covariances.

    Plugs the sample covariance (divisor ``n_h - 1``) of each stratum into the
    closed-form stratified covariance. Requires ``n_h >= 2`` everywhere.
    """
    _check(pop, sample.design)
    blocks = _estimate_blocks(pop, sample, True)
    return _closed_form(pop.grid, blocks, pop.N, pop.d, diagonal_only)


def ht_covariance_estimate(
    pop: CurvePopulation,
    sample: Sample,
    diagonal_only: bool = True,
    method: str = "auto",
) -> CovarianceFunction:
    """Unbiased Horvitz-Thompson estimator of the covariance function.

    ``N^-2 sum_{k,l in s} (Y_k / pi_k)(Y_l / pi_l) Delta_kl / pi_kl`` on grid
    points. Negative diagonal entries are returned as they are; see
    :attr:`CovarianceFunction.n_negative`.
    """
    design = sample.design
    _check(pop, design)
    design.require_estimable()
    if method == "auto":
        blocks = _estimate_blocks(pop, sample, False)
        return _closed_form(pop.grid, blocks, pop.N, pop.d, diagonal_only)
    if method != "pairs":
        raise ValueError(f"unknown method {method!r}")
    idx = sample.indices
    Z = pop.values[idx] / _pi(design, idx)[:, None]
    W = design.delta_matrix(idx) / design.pi2_matrix(idx)
    diag, full = _pair_sum(Z, W, diagonal_only)
    N2 = pop.N**2
    return CovarianceFunction(pop.grid, diag / N2, None if full is None else full / N2)


def ht_estimate(
    pop: CurvePopulation, sample: Sample, diagonal_only: bool = True
) -> FunctionalEstimate:
    """Mean curve and variance function estimated from one sample."""
    mean = ht_mean(pop, sample)
    cov = ht_covariance_estimate(pop, sample, diagonal_only)
    return FunctionalEstimate(pop.grid, mean, cov.variance_diag, cov.covariance, sample)
