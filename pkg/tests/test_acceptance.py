"""Exit criteria for the package, one test each.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL line per criterion
in the terminal summary.
"""

import time

import numpy as np
import pytest

from curvesurvey import (
    SRSWOR,
    CurvePopulation,
    StratifiedSRSWOR,
    SyntheticSpec,
    TimeGrid,
    allocation_objective,
    generate_synthetic,
    global_scale,
    ht_covariance_estimate,
    ht_mean,
    optimal_allocation,
    pointwise_scale,
    population_mean,
    proportional_allocation,
    run_experiment,
    stratified_true_covariance,
    stratified_variance_estimate,
    stratum_summaries,
    true_covariance,
)
from curvesurvey.allocate import StratumSummary
from curvesurvey.cli import main
from curvesurvey.mc import ExperimentSpec

acceptance = pytest.mark.acceptance


@pytest.fixture(scope="module")
def synthetic():
    return generate_synthetic(SyntheticSpec(N=2000, d=48, H=4, seed=0))


@acceptance("1 exact unbiasedness by enumeration")
def test_exact_unbiasedness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    values = rng.normal(10, 3, (6, 3)) * rng.uniform(0.5, 2, (6, 1))
    pop = CurvePopulation(TimeGrid([0.0, 0.5, 2.0]), values, strata=[1, 1, 1, 2, 2, 2])
    mu = population_mean(pop)
    for design in (SRSWOR(6, 3), StratifiedSRSWOR(pop.strata, [2, 2])):
        gamma = true_covariance(pop, design).variance_diag
        samples = design.enumerate_samples()
        mean = sum(p * ht_mean(pop, s) for s, p in samples)
        vhat = sum(p * ht_covariance_estimate(pop, s).variance_diag for s, p in samples)
        assert np.allclose(mean, mu, rtol=0, atol=1e-12)
        assert np.allclose(vhat, gamma, rtol=0, atol=1e-12)
        # the variance itself agrees with the spread over all samples
        spread = sum(p * (ht_mean(pop, s) - mu) ** 2 for s, p in samples)
        assert np.allclose(spread, gamma, rtol=0, atol=1e-12)
    assert time.perf_counter() - t0 < 1.0


@acceptance("2 variance formula equals enumeration on the toy population")
def test_toy_variance():
    pop = CurvePopulation(TimeGrid([0.0, 1.0]), np.array([[1.0, 2], [3, 4], [5, 6], [7, 8]]))
    design = SRSWOR(4, 2)
    value = true_covariance(pop, design).variance_diag[0]
    pairs = true_covariance(pop, design, method="pairs").variance_diag[0]
    samples = design.enumerate_samples()
    est = np.array([ht_mean(pop, s)[0] for s, _ in samples])
    p = np.array([p for _, p in samples])
    enumerated = p @ (est - p @ est) ** 2
    N, n = 4, 2
    classical = (1 - n / N) * np.var(pop.values[:, 0], ddof=1) / n
    for v in (value, pairs, enumerated, classical):
        assert v == pytest.approx(5 / 3, abs=1e-12)


def _random_instance(rng):
    H = int(rng.integers(1, 4))
    while True:
        N_h = rng.integers(2, 8, H)
        if N_h.sum() <= 20:
            break
    n_h = [int(rng.integers(2, N + 1)) for N in N_h]
    labels = np.repeat(np.arange(1, H + 1), N_h)
    rng.shuffle(labels)
    d = int(rng.integers(2, 7))
    values = rng.normal(0, 1, (labels.size, d)) * rng.uniform(0.2, 5, (labels.size, 1))
    values += rng.normal(0, 10, (labels.size, 1))
    grid = TimeGrid(np.cumsum(rng.uniform(0.1, 1, d)))
    return CurvePopulation(grid, values, strata=labels), StratifiedSRSWOR(labels, n_h)


def _rel_close(a, b, rel):
    scale = np.max(np.abs(b))
    return np.all(np.abs(a - b) <= rel * scale)


@acceptance("3 stratified closed forms equal the generic double sums")
def test_closed_form_vs_generic():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    for _ in range(100):
        pop, design = _random_instance(rng)
        closed = stratified_true_covariance(pop, design, diagonal_only=False)
        generic = true_covariance(pop, design, diagonal_only=False, method="pairs")
        assert np.allclose(closed.variance_diag, generic.variance_diag, rtol=1e-10, atol=0)
        assert _rel_close(closed.covariance, generic.covariance, 1e-10)

        s = design.draw(int(rng.integers(2**31)))
        closed = stratified_variance_estimate(pop, s, diagonal_only=False)
        generic = ht_covariance_estimate(pop, s, diagonal_only=False, method="pairs")
        assert np.allclose(closed.variance_diag, generic.variance_diag, rtol=1e-10, atol=0)
        assert _rel_close(closed.covariance, generic.covariance, 1e-10)
    assert time.perf_counter() - t0 < 5.0


@acceptance("4 band scaling constants")
def test_band_constants():
    assert global_scale(0.05) == pytest.approx(2.716, abs=5e-4)
    assert global_scale(0.01) == pytest.approx(3.255, abs=5e-4)
    assert pointwise_scale(0.05) == pytest.approx(1.960, abs=1e-3)
    assert pointwise_scale(0.01) == pytest.approx(2.576, abs=1e-3)


@acceptance("5 allocation optimality")
def test_allocation_optimality():
    hand = [StratumSummary(1, 100, 1.0), StratumSummary(2, 100, 3.0)]
    assert optimal_allocation(hand, 40).n_h == (10, 30)

    rng = np.random.default_rng(5)
    for _ in range(100):
        H = int(rng.integers(2, 7))
        N_h = rng.integers(2, 500, H)
        S_h = rng.uniform(0, 10, H) * (rng.uniform(size=H) > 0.1)
        if not np.any(S_h > 0):
            S_h[0] = 1.0
        summ = [StratumSummary(h + 1, int(N_h[h]), float(S_h[h])) for h in range(H)]
        n = int(rng.integers(H, N_h.sum() + 1))
        opt = optimal_allocation(summ, n)
        prop = proportional_allocation(summ, n)
        real_opt = allocation_objective(summ, opt.target)
        assert real_opt <= allocation_objective(summ, prop.target) * (1 + 1e-12) + 1e-15
        assert real_opt <= prop.objective * (1 + 1e-12) + 1e-15
        slack = opt.objective - real_opt  # loss from rounding the real optimum
        assert opt.objective <= prop.objective + slack + 1e-12


@acceptance("6 global band coverage at desk scale")
def test_coverage(synthetic):
    t0 = time.perf_counter()
    spec = ExperimentSpec([{"kind": "srswor", "n": 200}], replicates=1000, alphas=(0.05, 0.01), master_seed=0)
    d = run_experiment(spec, synthetic).designs[0]
    c95, c99 = d.coverage[0.05]["global"], d.coverage[0.01]["global"]
    print(f"\ncoverage: nominal 0.95 -> {c95:.3f}, nominal 0.99 -> {c99:.3f}")
    assert 0.965 <= c99 <= 1.0
    assert 0.88 <= c95 <= 0.99
    assert time.perf_counter() - t0 < 60.0


@acceptance("7 consistency probes")
def test_consistency(synthetic):
    t0 = time.perf_counter()
    spec = ExperimentSpec(
        [{"kind": "srswor", "n": 100}, {"kind": "srswor", "n": 400}], replicates=500, master_seed=7
    )
    small, large = run_experiment(spec, synthetic).designs
    ratio = (np.sqrt(400) * large.mean_sup_error_mu) / (np.sqrt(100) * small.mean_sup_error_mu)
    g100 = 100 * small.mean_sup_error_gamma
    g400 = 400 * large.mean_sup_error_gamma
    print(f"\nsqrt(n) sup-error ratio {ratio:.3f}; n sup-error of gamma {g100:.4g} -> {g400:.4g}")
    assert 0.6 <= ratio <= 1.4
    assert g400 < g100
    assert time.perf_counter() - t0 < 120.0


@acceptance("8 stratification gain ordering")
def test_stratification_gain(synthetic):
    n = 200
    designs = [
        {"kind": "srswor", "n": n, "name": "srswor"},
        {"kind": "stratified", "rule": "proportional", "n": n, "name": "proportional"},
        {"kind": "stratified", "rule": "optimal", "n": n, "name": "optimal"},
    ]
    report = run_experiment(ExperimentSpec(designs, replicates=1000, master_seed=8), synthetic)
    srs, prop, opt = (report[name] for name in ("srswor", "proportional", "optimal"))
    print(f"\nmean R(mu): optimal {opt.loss_mu.mean:.3f} < proportional {prop.loss_mu.mean:.3f} < srswor {srs.loss_mu.mean:.3f}")
    assert opt.loss_mu.mean < prop.loss_mu.mean < srs.loss_mu.mean

    summ = stratum_summaries(synthetic)
    a_opt = optimal_allocation(summ, n)
    a_prop = proportional_allocation(summ, n)
    slack = a_opt.objective - allocation_objective(summ, a_opt.target)
    assert opt.integrated_variance <= prop.integrated_variance + slack
    # the report's variances are the exact design quantities
    assert opt.integrated_variance == pytest.approx(a_opt.objective, rel=1e-9)
    assert prop.integrated_variance == pytest.approx(a_prop.objective, rel=1e-9)


@acceptance("9 experiment output is byte-identical across runs")
def test_experiment_determinism(tmp_path, monkeypatch):
    pop_path = tmp_path / "pop.csv"
    assert main(["generate", "--N", "300", "--d", "24", "--H", "3", "--seed", "4", "--out", str(pop_path)]) == 0
    config = tmp_path / "exp.json"
    config.write_text(
        '{"replicates": 200, "master_seed": 99, "alphas": [0.05, 0.01], "designs": ['
        '{"kind": "srswor", "n": 30}, {"kind": "stratified", "rule": "proportional", "n": 30},'
        '{"kind": "stratified", "rule": "optimal", "n": 30}]}'
    )
    outputs = []
    for run, threads in enumerate(("1", "4")):
        monkeypatch.setenv("CURVESURVEY_THREADS", threads)
        out = tmp_path / f"run{run}"
        assert main(["experiment", "--config", str(config), "--pop", str(pop_path), "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert set(outputs[0]) == {"report.json", "sd.tsv", "envelope.tsv"}
    assert outputs[0] == outputs[1]
