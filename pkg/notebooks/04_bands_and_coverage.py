"""
Confidence bands
================

A pointwise interval uses the normal quantile at each instant. A band that
must hold at all instants at once is wider; here it uses the multiplier
sqrt(2 log(2 / alpha)).
"""

# %%
import numpy as np

from curvesurvey import (
    SRSWOR,
    SyntheticSpec,
    build_band,
    covers,
    generate_synthetic,
    global_scale,
    ht_estimate,
    pointwise_scale,
    population_mean,
)

# %%
for alpha in (0.05, 0.01):
    print(f"alpha={alpha}: global {global_scale(alpha):.3f}, pointwise {pointwise_scale(alpha):.3f}")

# %%
pop = generate_synthetic(SyntheticSpec(N=2000, d=48, H=4, seed=0))
mu = population_mean(pop)
design = SRSWOR(pop.N, 200)
est = ht_estimate(pop, design.draw(seed=3))
band = build_band(est, 0.05, "global")
print("half width range:", band.half_width.min().round(3), "to", band.half_width.max().round(3))
print("this band covers the true mean:", covers(band, mu))

# %%
# Repeat over many samples to see how often each kind of band covers.
hits = {"global": 0, "pointwise": 0}
R = 300
for r in range(R):
    est = ht_estimate(pop, design.draw(seed=r))
    for kind in hits:
        hits[kind] += covers(build_band(est, 0.05, kind), mu)
print({k: v / R for k, v in hits.items()})

# %%
# Widths scale with the curves.
scaled = ht_estimate(pop.scaled(2.0, 0.0), design.draw(seed=3))
print(np.allclose(build_band(scaled, 0.05).half_width, 2 * band.half_width))
