"""
Populations of curves
=====================

A population is N curves observed on a common time grid. Between grid
points a curve is the straight line joining its neighbours, and integrals
over time use the trapezoid rule, which is exact for such curves.
"""

# %%
import numpy as np

from curvesurvey import (
    CurvePopulation,
    SyntheticSpec,
    TimeGrid,
    estimate_holder_beta,
    generate_synthetic,
    interpolate,
    population_mean,
    stratify_by_max_level,
    trapezoid_integral,
)

# %%
# A tiny hand-made population: four curves on two instants.
toy = CurvePopulation(TimeGrid([0.0, 1.0]), np.array([[1.0, 2], [3, 4], [5, 6], [7, 8]]))
print("mean curve:", population_mean(toy))
print("curve 0 at t=0.25:", interpolate(toy.values[0], toy.grid, 0.25))
print("integral of the mean:", trapezoid_integral(population_mean(toy), toy.grid))

# %%
# The synthetic generator stands in for a week of half-hourly electricity
# readings: a shared daily profile, a per-unit level, and smooth noise.
pop = generate_synthetic(SyntheticSpec(N=500, d=48, H=4, seed=1))
print(pop.N, "curves on", pop.d, "points over", pop.grid.span, "hours")
print("stratum sizes:", pop.stratum_sizes())

# %%
# Strata are quartiles of an auxiliary level. Larger units vary more,
# which is what makes stratification pay off later.
for h in range(1, pop.H + 1):
    block = pop.values[pop.strata == h]
    print(f"stratum {h}: mean level {block.mean():7.2f}, sd of levels {block.mean(axis=1).std():6.2f}")

# %%
# Re-stratify by each curve's own peak instead.
by_peak = stratify_by_max_level(pop, 4)
peak = by_peak.values.max(axis=1)
for h in range(1, 5):
    sel = peak[by_peak.strata == h]
    print(f"stratum {h}: peaks from {sel.min():.2f} to {sel.max():.2f}")

# %%
# Regularity of the trajectories (an exponent near 1 means Lipschitz-smooth
# paths; rough paths give smaller values).
fine = generate_synthetic(SyntheticSpec(N=200, d=336, H=4, seed=1))
print("Hoelder exponent, d=336:", round(estimate_holder_beta(fine), 2))
