"""
Designs and Horvitz-Thompson estimation
=======================================

Each sampled curve is weighted by the inverse of its inclusion probability.
For small populations every possible sample can be listed, which gives the
exact design expectation and variance to check the formulas against.
"""

# %%
import numpy as np

from curvesurvey import (
    SRSWOR,
    CurvePopulation,
    StratifiedSRSWOR,
    TimeGrid,
    ht_covariance_estimate,
    ht_mean,
    population_mean,
    true_covariance,
)

# %%
toy = CurvePopulation(TimeGrid([0.0, 1.0]), np.array([[1.0, 2], [3, 4], [5, 6], [7, 8]]))
design = SRSWOR(4, 2)
print("pi_k =", design.pi1(0), " pi_kl =", design.pi2(0, 1))

# %%
# All six samples of size two, with the estimate each one gives.
samples = design.enumerate_samples()
for s, p in samples:
    print(s.indices.tolist(), ht_mean(toy, s), "variance estimate", ht_covariance_estimate(toy, s).variance_diag)

# %%
# Averaging over samples recovers the population mean exactly, and the
# spread of the estimates is the design variance 5/3.
est = np.array([ht_mean(toy, s) for s, _ in samples])
p = np.array([p for _, p in samples])
print("E[mu_hat]   =", p @ est, " population mean =", population_mean(toy))
print("Var[mu_hat] =", p @ (est - p @ est) ** 2, " formula =", true_covariance(toy, design).variance_diag)

# %%
# A stratified design draws separately inside each stratum.
rng = np.random.default_rng(0)
pop = CurvePopulation(TimeGrid([0.0, 1.0, 2.0]), rng.normal(10, 3, (8, 3)), strata=[1, 1, 1, 1, 2, 2, 2, 2])
strat = StratifiedSRSWOR(pop.strata, [2, 3])
sample = strat.draw(seed=42)
print("drawn units:", sample.indices.tolist())
print("estimate:", ht_mean(pop, sample).round(3), " truth:", population_mean(pop).round(3))

# %%
# The same draw from the same seed, every time.
assert strat.draw(seed=42).indices.tolist() == sample.indices.tolist()
