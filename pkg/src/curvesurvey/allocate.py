"""Stratum dispersion summaries and sample-size allocation.

Two rules are provided. Proportional allocation takes ``n_h`` proportional
to ``N_h``. Optimal allocation minimises the integrated variance
``int gamma_strat(t, t) dt`` for a fixed total ``n``; before rounding its
solution is ``n_h* = n N_h S_h / sum_i N_i S_i`` with
``S_h^2 = int gamma~_h(t, t) dt``.

Real-valued targets are kept inside ``[1, N_h]`` by water-filling: strata
hitting a bound are clamped and the remaining sample is spread over the
others in proportion to their weights, i.e. ``x_h = clip(c w_h, 1, N_h)``
with ``c`` chosen so that the targets sum to ``n``. For the optimal rule
this is the exact minimiser under the box constraints. Targets are then
rounded by the largest-remainder method, ties going to the lower stratum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateStratumError
from .population import CurvePopulation, trapezoid_integral


@dataclass(frozen=True)
class StratumSummary:
    h: int
    N_h: int
    S_h: float


@dataclass(frozen=True)
class Allocation:
    """Integer stratum sample sizes and the integrated variance they give."""

    n_h: tuple
    rule: str
    objective: float
    S_h: tuple = ()
    target: tuple = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return int(sum(self.n_h))

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "n_h": list(self.n_h),
            "S_h": list(self.S_h),
            "objective": self.objective,
        }


def stratum_summaries(pop: CurvePopulation) -> list:
    """``S_h`` for every stratum of ``pop``.

    ``S_h^2`` is the trapezoid integral over the grid of the within-stratum
    variance function with divisor ``N_h - 1``.
    """
    if pop.strata is None:
        raise ValueError("strata required: population has no stratum labels")
    out = []
    for h, N_h in enumerate(pop.stratum_sizes(), start=1):
        if N_h < 2:
            raise DegenerateStratumError(f"stratum {h} has N_h = {N_h} < 2")
        var = np.var(pop.values[pop.strata == h], axis=0, ddof=1)
        out.append(StratumSummary(h, int(N_h), float(np.sqrt(trapezoid_integral(var, pop.grid)))))
    return out


def _arrays(summaries):
    N_h = np.array([s.N_h for s in summaries], dtype=float)
    S_h = np.array([s.S_h for s in summaries], dtype=float)
    return N_h, S_h


def allocation_objective(summaries: Sequence[StratumSummary], n_h) -> float:
    """``N^-2 sum_h N_h (N_h - n_h) / n_h S_h^2``; ``n_h`` may be real-valued."""
    if isinstance(n_h, Allocation):
        n_h = n_h.n_h
    N_h, S_h = _arrays(summaries)
    n_h = np.asarray(n_h, dtype=float)
    if n_h.shape != N_h.shape:
        raise ValueError("one sample size per stratum is required")
    if np.any(n_h <= 0):
        raise ValueError("stratum sample sizes must be positive")
    N = N_h.sum()
    terms = np.where(S_h == 0.0, 0.0, N_h * (N_h - n_h) / n_h * S_h**2)
    return float(np.sum(terms) / N**2)


def _fill(w, n, lo, hi):
    """``clip(c w, lo, hi)`` with ``c`` such that the sum is ``n`` (when reachable).

    Active-set iteration: share what is left over the free strata in
    proportion to ``w``, clamp the side (upper or lower) with the larger total
    violation, repeat. Strata with ``w <= 0`` stay at ``lo``.
    """
    x = np.array(lo, dtype=float)
    free = w > 0
    while free.any():
        x[free] = (n - x[~free].sum()) * (w[free] / w[free].sum())
        over = np.where(free, np.maximum(x - hi, 0.0), 0.0)
        under = np.where(free, np.maximum(lo - x, 0.0), 0.0)
        if over.sum() >= under.sum():
            clamp = over > 0
            x[clamp] = hi[clamp]
        else:
            clamp = under > 0
            x[clamp] = lo[clamp]
        if not clamp.any():
            break
        free &= ~clamp
    return x


def feasible_targets(weights, n: int, N_h) -> np.ndarray:
    """Real targets ``clip(c w_h, 1, N_h)`` summing to ``n``.

    Strata with zero weight receive 1 unless the weighted strata cannot
    absorb ``n``, in which case the rest is spread over them in proportion
    to ``N_h``.
    """
    w = np.asarray(weights, dtype=float)
    N_h = np.asarray(N_h, dtype=float)
    H = N_h.size
    if not H <= n <= N_h.sum():
        raise ValueError(f"need H <= n <= N, got n={n}, H={H}, N={int(N_h.sum())}")
    lo = np.ones(H)
    x = _fill(w, n, lo, N_h)
    short = n - x.sum()
    if short > 1e-9 * n:
        zero = w <= 0
        x[zero] = _fill(N_h[zero], n - x[~zero].sum(), lo[zero], N_h[zero])
    return x


def largest_remainder(x, n: int, N_h) -> np.ndarray:
    """Round targets ``x`` (summing to ``n``, inside ``[1, N_h]``) to integers."""
    x = np.asarray(x, dtype=float)
    caps = np.asarray(N_h, dtype=np.int64)
    base = np.clip(np.floor(x + 1e-9).astype(np.int64), 1, caps)
    left = int(n - base.sum())
    if left < 0:
        raise ValueError("targets exceed the total sample size")
    frac = x - base
    order = np.lexsort((np.arange(x.size), -frac))
    for h in order:
        if left == 0:
            break
        if base[h] < caps[h]:
            base[h] += 1
            left -= 1
    if left:
        raise ValueError("no feasible allocation exists")
    return base


def _allocate(summaries, n, weights, rule):
    N_h, S_h = _arrays(summaries)
    x = feasible_targets(weights, int(n), N_h)
    n_h = largest_remainder(x, int(n), N_h)
    return Allocation(
        tuple(int(v) for v in n_h),
        rule,
        allocation_objective(summaries, n_h),
        tuple(float(s) for s in S_h),
        tuple(float(v) for v in x),
    )


def proportional_allocation(summaries: Sequence[StratumSummary], n: int) -> Allocation:
    """``n_h`` proportional to ``N_h``."""
    N_h, _ = _arrays(summaries)
    return _allocate(summaries, n, N_h, "proportional")


def optimal_allocation(summaries: Sequence[StratumSummary], n: int) -> Allocation:
    """Allocation minimising the integrated variance of the stratified estimator."""
    N_h, S_h = _arrays(summaries)
    if not np.any(N_h * S_h > 0):
        warnings.warn("all strata have S_h = 0; using proportional allocation", stacklevel=2)
        return proportional_allocation(summaries, n)
    return _allocate(summaries, n, N_h * S_h, "optimal")


def optimal_targets_unconstrained(summaries: Sequence[StratumSummary], n: int) -> np.ndarray:
    """Real-valued ``n N_h S_h / sum_i N_i S_i`` with no bounds applied."""
    N_h, S_h = _arrays(summaries)
    w = N_h * S_h
    return n * w / w.sum()


def manual_allocation(summaries: Sequence[StratumSummary], n_h) -> Allocation:
    _, S_h = _arrays(summaries)
    n_h = tuple(int(v) for v in n_h)
    return Allocation(
        n_h, "manual", allocation_objective(summaries, n_h), tuple(float(s) for s in S_h)
    )
