import json
import warnings

import numpy as np
import pytest

from curvesurvey import (
    CurvePopulation,
    SyntheticSpec,
    TimeGrid,
    compare_designs,
    generate_synthetic,
    loss_gamma,
    loss_mu,
    population_mean,
    run_experiment,
)
from curvesurvey.mc import (
    ExperimentSpec,
    child_seed,
    format_table,
    report_to_dict,
    write_report,
)

from conftest import random_population


@pytest.fixture(scope="module")
def small_pop():
    return generate_synthetic(SyntheticSpec(N=200, d=12, H=3, seed=5))


def test_loss_examples():
    g = TimeGrid([0.0, 1.0, 2.0])
    assert loss_mu([1, 2, 3], [1, 2, 3], g) == 0.0
    assert loss_mu([0, 2, 0], [0, 0, 0], g) == 2.0
    assert loss_mu(np.full(3, 0.25), np.zeros(3), g) == 0.5  # constant error times T
    assert loss_gamma([1.5, 1.5, 1.5], [1, 1, 1], g) == 1.0  # constant bias times T
    with pytest.raises(ValueError):
        loss_mu([1, 2], [1, 2, 3], g)


def test_child_seeds():
    assert child_seed(0, 0, 0) == child_seed(0, 0, 0)
    seeds = {child_seed(7, i, r) for i in range(3) for r in range(500)}
    assert len(seeds) == 1500
    assert all(0 <= s < 2**64 for s in seeds)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec([], replicates=10)
    with pytest.raises(ValueError):
        ExperimentSpec([{"kind": "census"}], replicates=0)
    with pytest.raises(ValueError):
        ExperimentSpec([{"kind": "census"}], alphas=(1.5,))
    spec = ExperimentSpec([{"kind": "census"}, {"kind": "srswor", "n": 3, "name": "s"}])
    assert [d["name"] for d in spec.designs] == ["census1", "s"]


def test_spec_from_dict_with_synthetic_population():
    spec = ExperimentSpec.from_dict(
        {"population": {"synthetic": {"N": 50, "d": 6, "H": 2, "seed": 1}}, "designs": [{"kind": "census"}]}
    )
    assert spec.load_population().N == 50
    assert spec.replicates == 1000 and spec.alphas == (0.05, 0.01)


def test_census_single_replicate():
    rng = np.random.default_rng(0)
    pop = random_population(rng, 10, 5)
    report = run_experiment(ExperimentSpec([{"kind": "census"}], replicates=1), pop)
    d = report.designs[0]
    assert d.ok
    assert d.loss_mu.mean == pytest.approx(0.0, abs=1e-12)
    assert d.loss_gamma.mean == 0.0
    assert d.integrated_variance == 0.0
    assert all(c["global"] == 1.0 and c["pointwise"] == 1.0 for c in d.coverage.values())


def test_report_contents(small_pop):
    spec = ExperimentSpec(
        [{"kind": "srswor", "n": 30}, {"kind": "stratified", "rule": "optimal", "n": 30}],
        replicates=200,
        master_seed=3,
    )
    report = run_experiment(spec, small_pop)
    assert [d.name for d in report.designs] == ["srswor1", "stratified2"]
    for d in report.designs:
        assert d.ok and sum(d.n_h) == 30
        lm = d.loss_mu
        assert lm.q1 <= lm.median <= lm.q3
        assert d.loss_gamma.q1 <= d.loss_gamma.median <= d.loss_gamma.q3
        for c in d.coverage.values():
            assert 0 <= c["global"] <= 1 and 0 <= c["pointwise"] <= 1
        assert np.all(d.envelope_low <= d.replicate_mean)
        assert np.all(d.replicate_mean <= d.envelope_high)
        assert np.allclose(d.sd_curve, np.sqrt(d.true_variance))
    assert report["srswor1"] is report.designs[0]
    with pytest.raises(KeyError):
        report["nope"]
    table = format_table(report)
    assert "srswor1" in table and "cov0.95" in table


def test_determinism_and_worker_independence(small_pop, tmp_path):
    spec = ExperimentSpec(
        [{"kind": "srswor", "n": 20}, {"kind": "stratified", "rule": "proportional", "n": 20}],
        replicates=300,
        master_seed=11,
    )
    a = run_experiment(spec, small_pop, workers=1)
    b = run_experiment(spec, small_pop, workers=1)
    c = run_experiment(spec, small_pop, workers=4)
    da, db, dc = (json.dumps(report_to_dict(r)) for r in (a, b, c))
    assert da == db == dc
    for x, y in zip(a.designs, c.designs):
        assert np.array_equal(x.replicate_mean, y.replicate_mean)
        assert np.array_equal(x.variance_estimate_mean, y.variance_estimate_mean)
    other = run_experiment(
        ExperimentSpec(spec.designs, replicates=300, master_seed=12), small_pop
    )
    assert json.dumps(report_to_dict(other)) != da
    write_report(a, tmp_path / "a")
    write_report(c, tmp_path / "c")
    for name in ("report.json", "sd.tsv", "envelope.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_replicates_are_a_prefix(small_pop):
    # seeds depend on (design, replicate) only, so a longer run extends a shorter one
    short = run_experiment(ExperimentSpec([{"kind": "srswor", "n": 15}], replicates=64), small_pop)
    longer = run_experiment(ExperimentSpec([{"kind": "srswor", "n": 15}], replicates=128), small_pop)
    s, l = short.designs[0], longer.designs[0]
    assert np.all(l.envelope_low <= s.envelope_low) and np.all(l.envelope_high >= s.envelope_high)


def test_failing_design_is_recorded(small_pop):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = run_experiment(
            ExperimentSpec(
                [{"kind": "stratified", "allocation": [1, 5, 5]}, {"kind": "srswor", "n": 10}],
                replicates=20,
            ),
            small_pop,
        )
    bad, good = report.designs
    assert not bad.ok and "VarianceNotEstimable" in bad.error
    assert good.ok
    out = report_to_dict(report)
    assert "error" in out["designs"][0]
    assert out["ranking"] == ["srswor2"]


def test_write_report_layout(small_pop, tmp_path):
    report = run_experiment(
        ExperimentSpec([{"kind": "srswor", "n": 20, "name": "a"}, {"kind": "census", "name": "b"}], replicates=10),
        small_pop,
    )
    paths = write_report(report, tmp_path)
    data = json.loads(paths["report"].read_text())
    assert data["replicates"] == 10 and data["ranking"] == ["b", "a"]
    assert set(data["designs"][0]["coverage"]) == {"0.05", "0.01"}
    assert "elapsed" not in paths["report"].read_text()
    sd = paths["sd"].read_text().splitlines()
    assert sd[0].split("\t") == ["t", "sd_a", "sd_b"]
    assert len(sd) == 1 + small_pop.d
    env = paths["envelope"].read_text().splitlines()
    assert env[0].split("\t") == ["t", "mu", "low_a", "high_a", "low_b", "high_b"]


def test_compare_designs(small_pop):
    designs = [
        {"kind": "srswor", "n": 30, "name": "first"},
        {"kind": "srswor", "n": 30, "name": "second"},
        {"kind": "census", "name": "all"},
    ]
    report = run_experiment(ExperimentSpec(designs, replicates=50), small_pop)
    ranking = compare_designs(report)
    assert ranking[0]["name"] == "all" and ranking[0]["mean_loss_mu"] == pytest.approx(0, abs=1e-12)
    by_var = [r["name"] for r in compare_designs(report, by="integrated_variance")]
    # identical designs tie on the theoretical variance and keep report order
    assert by_var == ["all", "first", "second"]
    assert all(r["sd_curve"].shape == (small_pop.d,) for r in ranking)
    with pytest.raises(ValueError):
        compare_designs(report, by="median")


def test_optimal_ranked_before_proportional_in_theory():
    pop = generate_synthetic(SyntheticSpec(N=400, d=16, H=4, seed=2, amplitude_spread=0.8))
    designs = [
        {"kind": "stratified", "rule": "proportional", "n": 60, "name": "prop"},
        {"kind": "stratified", "rule": "optimal", "n": 60, "name": "opt"},
    ]
    report = run_experiment(ExperimentSpec(designs, replicates=5), pop)
    assert [r["name"] for r in compare_designs(report, by="integrated_variance")] == ["opt", "prop"]


def test_replicate_mean_converges(small_pop):
    # R = 10^4: the average estimate is within 4 Monte Carlo standard errors everywhere
    R = 10_000
    report = run_experiment(ExperimentSpec([{"kind": "stratified", "rule": "optimal", "n": 24}], replicates=R), small_pop)
    d = report.designs[0]
    se = np.sqrt(d.true_variance / R)
    assert np.all(np.abs(d.replicate_mean - population_mean(small_pop)) <= 4 * se)
    # the spread of the replicates matches the exact design variance
    assert np.allclose(d.replicate_mean_sd**2, d.true_variance, rtol=0.05)


@pytest.mark.slow
def test_toy_variance_estimator_mean():
    pop = CurvePopulation(TimeGrid([0.0, 1.0]), np.array([[1.0, 2], [3, 4], [5, 6], [7, 8]]))
    R = 100_000
    report = run_experiment(ExperimentSpec([{"kind": "srswor", "n": 2}], replicates=R), pop)
    d = report.designs[0]
    se = d.variance_estimate_sd[0] / np.sqrt(R)
    assert abs(d.variance_estimate_mean[0] - 5 / 3) <= 3 * se
    assert d.true_variance[0] == pytest.approx(5 / 3, abs=1e-12)
