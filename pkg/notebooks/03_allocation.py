"""
Allocating a sample across strata
=================================

Proportional allocation gives each stratum its share of the population.
The optimal rule spends more where curves vary more: n_h is proportional to
N_h S_h, where S_h^2 is the integrated within-stratum variance.
"""

# %%
from curvesurvey import (
    SyntheticSpec,
    allocation_objective,
    generate_synthetic,
    optimal_allocation,
    proportional_allocation,
    stratum_summaries,
)
from curvesurvey.allocate import StratumSummary

# %%
# Two equal strata, the second three times as variable.
summ = [StratumSummary(1, 100, 1.0), StratumSummary(2, 100, 3.0)]
for rule in (proportional_allocation, optimal_allocation):
    a = rule(summ, 40)
    print(f"{a.rule:>12}: n_h = {a.n_h}, integrated variance = {a.objective:.5f}")

# %%
# A stratum can only give as many units as it has. Here the formula asks for
# more than five from a five-unit stratum; the excess moves to the other one.
tight = [StratumSummary(1, 5, 50.0), StratumSummary(2, 200, 1.0)]
print(optimal_allocation(tight, 40).n_h)

# %%
# On the synthetic population.
pop = generate_synthetic(SyntheticSpec(N=2000, d=48, H=4, seed=1))
summ = stratum_summaries(pop)
print("S_h:", [round(s.S_h, 2) for s in summ])
prop = proportional_allocation(summ, 200)
opt = optimal_allocation(summ, 200)
print("proportional", prop.n_h, round(prop.objective, 4))
print("optimal     ", opt.n_h, round(opt.objective, 4))
print("any other split does worse, e.g. (20, 40, 60, 80):", round(allocation_objective(summ, [20, 40, 60, 80]), 4))
