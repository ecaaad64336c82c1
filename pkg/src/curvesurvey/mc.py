"""Monte Carlo replication of sampling designs on a known population.

For each design and replicate a sample is drawn, the mean curve and its
variance function are estimated, and the estimates are compared with the
exact population quantities: integrated absolute losses, sup-norm errors
and band coverage.

Replicate ``r`` of design number ``i`` uses the sample seed
``child_seed(master_seed, i, r)``: the first 64 bits generated by
``numpy.random.SeedSequence([master_seed, i, r])``. Seeds do not depend on
execution order, so replicates may run in any order or in parallel and the
report is unchanged.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import bands
from .allocate import stratum_summaries
from .design import design_from_config
from .estimate import ht_covariance_estimate, ht_mean, true_covariance
from .population import (
    CurvePopulation,
    SyntheticSpec,
    TimeGrid,
    generate_synthetic,
    load_csv,
    population_mean,
    trapezoid_integral,
)

SIG_DIGITS = 12
CHUNK = 64  # replicates per work unit


def child_seed(master_seed: int, design_index: int, replicate: int) -> int:
    state = np.random.SeedSequence([int(master_seed), int(design_index), int(replicate)])
    lo, hi = state.generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


def _same_grid(a, b, grid):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(grid) if isinstance(grid, TimeGrid) else np.asarray(grid).size
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError("estimate and truth must both live on the loss grid")
    return a, b


def loss_mu(estimate, truth, grid) -> float:
    """Integrated absolute error of a mean-curve estimate."""
    a, b = _same_grid(estimate, truth, grid)
    return trapezoid_integral(np.abs(a - b), grid)


def loss_gamma(var_estimate, var_truth, grid) -> float:
    """Integrated absolute error of a variance-function estimate."""
    a, b = _same_grid(var_estimate, var_truth, grid)
    return trapezoid_integral(np.abs(a - b), grid)


# -- specification -----------------------------------------------------------


@dataclass
class ExperimentSpec:
    """What to replicate.

    ``designs`` is a list of design configurations (see
    :func:`curvesurvey.design.design_from_config`), each with a ``name``.
    ``population`` is a CSV path, a :class:`SyntheticSpec`, or ``None`` when
    the population is passed to :func:`run_experiment` directly.
    """

    designs: list
    replicates: int = 1000
    alphas: tuple = (0.05, 0.01)
    master_seed: int = 0
    population: Union[str, SyntheticSpec, None] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.designs:
            raise ValueError("at least one design is required")
        self.alphas = tuple(float(a) for a in self.alphas)
        if not all(0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        named = []
        for i, d in enumerate(self.designs):
            d = dict(d)
            d.setdefault("name", f"{d.get('kind', 'design')}{i + 1}")
            named.append(d)
        self.designs = named

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        pop = data.get("population")
        if isinstance(pop, dict):
            pop = SyntheticSpec(**pop.get("synthetic", pop))
        return cls(
            designs=list(data["designs"]),
            replicates=int(data.get("replicates", 1000)),
            alphas=tuple(data.get("alphas", (0.05, 0.01))),
            master_seed=int(data.get("master_seed", 0)),
            population=pop,
        )

    def load_population(self) -> CurvePopulation:
        if self.population is None:
            raise ValueError("the experiment names no population")
        if isinstance(self.population, SyntheticSpec):
            return generate_synthetic(self.population)
        return load_csv(self.population)


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class LossSummary:
    mean: float
    q1: float
    median: float
    q3: float

    @classmethod
    def of(cls, x) -> "LossSummary":
        q1, med, q3 = np.percentile(x, [25, 50, 75])
        return cls(float(np.mean(x)), float(q1), float(med), float(q3))


@dataclass
class DesignResult:
    name: str
    config: dict
    error: Optional[str] = None
    n_h: tuple = ()
    loss_mu: Optional[LossSummary] = None
    loss_gamma: Optional[LossSummary] = None
    coverage: dict = field(default_factory=dict)
    integrated_variance: float = float("nan")
    mean_sup_error_mu: float = float("nan")
    mean_sup_error_gamma: float = float("nan")
    replicates_with_negative_variance: int = 0
    # curves on the grid, not part of the JSON report
    sd_curve: Optional[np.ndarray] = None
    true_variance: Optional[np.ndarray] = None
    replicate_mean: Optional[np.ndarray] = None
    replicate_mean_sd: Optional[np.ndarray] = None
    variance_estimate_mean: Optional[np.ndarray] = None
    variance_estimate_sd: Optional[np.ndarray] = None
    envelope_low: Optional[np.ndarray] = None
    envelope_high: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class McReport:
    grid: TimeGrid
    population_mean: np.ndarray
    replicates: int
    alphas: tuple
    master_seed: int
    designs: list
    elapsed_seconds: float = 0.0

    def __getitem__(self, name) -> DesignResult:
        for d in self.designs:
            if d.name == name:
                return d
        raise KeyError(name)


# -- running -------------------------------------------------------------------


def _replicate_block(pop, design, design_index, reps, master_seed, alphas, mu, gamma):
    R = len(reps)
    d = pop.d
    A = len(alphas)
    out = {
        "loss_mu": np.empty(R),
        "loss_gamma": np.empty(R),
        "sup_mu": np.empty(R),
        "sup_gamma": np.empty(R),
        "negative": np.zeros(R, dtype=bool),
        "global": np.zeros((A, R), dtype=bool),
        "pointwise": np.zeros((A, R)),
        "sum_mean": np.zeros(d),
        "sumsq_mean": np.zeros(d),
        "sum_var": np.zeros(d),
        "sumsq_var": np.zeros(d),
        "low": np.full(d, np.inf),
        "high": np.full(d, -np.inf),
    }
    # rows 0..A-1 global, A..2A-1 pointwise
    scales = np.array([bands.global_scale(a) for a in alphas] + [bands.pointwise_scale(a) for a in alphas])
    dt = np.diff(pop.grid.points)
    for j, r in enumerate(reps):
        sample = design.draw(child_seed(master_seed, design_index, r))
        m = ht_mean(pop, sample)
        v = ht_covariance_estimate(pop, sample).variance_diag
        err = np.abs(m - mu)
        verr = np.abs(v - gamma)
        # same operation order as trapezoid_integral
        out["loss_mu"][j] = np.sum(dt * (err[1:] + err[:-1])) / 2.0
        out["loss_gamma"][j] = np.sum(dt * (verr[1:] + verr[:-1])) / 2.0
        out["sup_mu"][j] = err.max()
        out["sup_gamma"][j] = verr.max()
        out["negative"][j] = v.min() < 0
        flags = bands.covered_points(m, scales[:, None] * np.sqrt(np.maximum(v, 0.0)), mu)
        out["global"][:, j] = flags[:A].all(axis=1)
        out["pointwise"][:, j] = flags[A:].mean(axis=1)
        out["sum_mean"] += m
        out["sumsq_mean"] += m * m
        out["sum_var"] += v
        out["sumsq_var"] += v * v
        np.minimum(out["low"], m, out=out["low"])
        np.maximum(out["high"], m, out=out["high"])
    return out


def _merge(blocks):
    first = blocks[0]
    merged = {}
    for key in first:
        if key.startswith("sum"):
            merged[key] = sum((b[key] for b in blocks), np.zeros_like(first[key]))
        elif key == "low":
            merged[key] = np.min([b[key] for b in blocks], axis=0)
        elif key == "high":
            merged[key] = np.max([b[key] for b in blocks], axis=0)
        else:
            merged[key] = np.concatenate([b[key] for b in blocks], axis=-1)
    return merged


def _mean_sd(s, ss, R):
    mean = s / R
    if R < 2:
        return mean, np.zeros_like(mean)
    var = np.maximum(ss - R * mean * mean, 0.0) / (R - 1)
    return mean, np.sqrt(var)


def default_workers() -> int:
    """Worker count from ``CURVESURVEY_THREADS`` (0 or unset means automatic)."""
    try:
        n = int(os.environ.get("CURVESURVEY_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


def run_experiment(
    spec: ExperimentSpec,
    population: Optional[CurvePopulation] = None,
    workers: int = 1,
) -> McReport:
    """Replicate every design of ``spec`` and summarise the results.

    A design that cannot be built or whose variance cannot be estimated is
    reported with its ``error`` set; the other designs still run.
    """
    t0 = time.perf_counter()
    pop = population if population is not None else spec.load_population()
    mu = population_mean(pop)
    summaries = None
    if pop.strata is not None and np.all(pop.stratum_sizes() >= 2):
        summaries = stratum_summaries(pop)

    results = []
    for i, config in enumerate(spec.designs):
        res = DesignResult(config["name"], config)
        try:
            cfg = {k: v for k, v in config.items() if k != "name"}
            design = design_from_config(cfg, pop, summaries)
            design.require_estimable()
        except Exception as exc:  # recorded per design, the run goes on
            res.error = f"{type(exc).__name__}: {exc}"
            results.append(res)
            continue

        gamma = true_covariance(pop, design).variance_diag
        # fixed-size chunks merged in replicate order: sums do not depend on workers
        reps = np.arange(spec.replicates)
        chunks = [reps[k : k + CHUNK] for k in range(0, spec.replicates, CHUNK)]
        args = (pop, design, i)
        tail = (spec.master_seed, spec.alphas, mu, gamma)
        if workers <= 1 or len(chunks) == 1:
            blocks = [_replicate_block(*args, c, *tail) for c in chunks]
        else:
            with ThreadPoolExecutor(min(workers, len(chunks))) as pool:
                blocks = list(pool.map(lambda c: _replicate_block(*args, c, *tail), chunks))
        acc = _merge(blocks)

        R = spec.replicates
        res.n_h = tuple(int(v) for v in design.n_h)
        res.loss_mu = LossSummary.of(acc["loss_mu"])
        res.loss_gamma = LossSummary.of(acc["loss_gamma"])
        res.coverage = {
            a: {"global": float(acc["global"][j].mean()), "pointwise": float(acc["pointwise"][j].mean())}
            for j, a in enumerate(spec.alphas)
        }
        res.true_variance = gamma
        res.integrated_variance = trapezoid_integral(gamma, pop.grid)
        res.sd_curve = np.sqrt(gamma)
        res.mean_sup_error_mu = float(acc["sup_mu"].mean())
        res.mean_sup_error_gamma = float(acc["sup_gamma"].mean())
        res.replicates_with_negative_variance = int(acc["negative"].sum())
        res.replicate_mean, res.replicate_mean_sd = _mean_sd(acc["sum_mean"], acc["sumsq_mean"], R)
        res.variance_estimate_mean, res.variance_estimate_sd = _mean_sd(
            acc["sum_var"], acc["sumsq_var"], R
        )
        res.envelope_low, res.envelope_high = acc["low"], acc["high"]
        results.append(res)

    return McReport(
        pop.grid, mu, spec.replicates, spec.alphas, spec.master_seed, results,
        time.perf_counter() - t0,
    )


def compare_designs(report: McReport, by: str = "loss_mu") -> list:
    """Designs ranked by mean ``R(mu)`` (or ``by="integrated_variance"``).

    Each entry carries the theoretical standard deviation curve
    ``sqrt(gamma(t, t))`` for plotting. Ties keep report order; failed
    designs are left out.
    """
    ok = [d for d in report.designs if d.ok]
    if by == "loss_mu":
        key = lambda d: d.loss_mu.mean
    elif by == "integrated_variance":
        key = lambda d: d.integrated_variance
    else:
        raise ValueError(f"cannot rank by {by!r}")
    ranked = sorted(ok, key=key)
    return [
        {
            "rank": i + 1,
            "name": d.name,
            "mean_loss_mu": d.loss_mu.mean,
            "integrated_variance": d.integrated_variance,
            "sd_curve": d.sd_curve,
        }
        for i, d in enumerate(ranked)
    ]


# -- output ------------------------------------------------------------------


def _num(x):
    return float(f"{float(x):.{SIG_DIGITS}g}")


def _fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def report_to_dict(report: McReport) -> dict:
    designs = []
    for d in report.designs:
        entry = {"name": d.name, "config": d.config}
        if not d.ok:
            entry["error"] = d.error
            designs.append(entry)
            continue
        entry.update(
            n_h=list(d.n_h),
            loss_mu={k: _num(v) for k, v in vars(d.loss_mu).items()},
            loss_gamma={k: _num(v) for k, v in vars(d.loss_gamma).items()},
            coverage={
                _fmt(a): {k: _num(v) for k, v in c.items()} for a, c in d.coverage.items()
            },
            integrated_variance=_num(d.integrated_variance),
            mean_sup_error_mu=_num(d.mean_sup_error_mu),
            mean_sup_error_gamma=_num(d.mean_sup_error_gamma),
            replicates_with_negative_variance=d.replicates_with_negative_variance,
        )
        designs.append(entry)
    ok = [d for d in report.designs if d.ok]
    return {
        "replicates": report.replicates,
        "alphas": [_num(a) for a in report.alphas],
        "master_seed": report.master_seed,
        "N_grid": len(report.grid),
        "designs": designs,
        "ranking": [r["name"] for r in compare_designs(report)] if ok else [],
    }


def write_report(report: McReport, out_dir) -> dict:
    """Write ``report.json``, ``sd.tsv`` and ``envelope.tsv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "sd": out / "sd.tsv",
        "envelope": out / "envelope.tsv",
    }
    with open(paths["report"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=False)
        fh.write("\n")

    ok = [d for d in report.designs if d.ok]
    t = report.grid.points
    with open(paths["sd"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(["t"] + [f"sd_{d.name}" for d in ok]) + "\n")
        for j in range(t.size):
            fh.write("\t".join([_fmt(t[j])] + [_fmt(d.sd_curve[j]) for d in ok]) + "\n")
    with open(paths["envelope"], "w", encoding="utf-8", newline="\n") as fh:
        cols = ["t", "mu"]
        for d in ok:
            cols += [f"low_{d.name}", f"high_{d.name}"]
        fh.write("\t".join(cols) + "\n")
        for j in range(t.size):
            row = [_fmt(t[j]), _fmt(report.population_mean[j])]
            for d in ok:
                row += [_fmt(d.envelope_low[j]), _fmt(d.envelope_high[j])]
            fh.write("\t".join(row) + "\n")
    return paths


def format_table(report: McReport) -> str:
    """Plain-text table of loss quartiles and coverage, one row per design."""
    head = (
        f"{'design':<16}{'R(mu) mean':>11}{'q1':>9}{'median':>9}{'q3':>9}"
        f"{'R(g) mean':>11}{'q1':>9}{'median':>9}{'q3':>9}"
    )
    head += "".join(f"{'cov' + format(1 - a, '.2f'):>10}" for a in report.alphas)
    lines = [head]
    for d in report.designs:
        if not d.ok:
            lines.append(f"{d.name:<16}failed: {d.error}")
            continue
        lm, lg = d.loss_mu, d.loss_gamma
        row = f"{d.name:<16}{lm.mean:>11.4g}{lm.q1:>9.4g}{lm.median:>9.4g}{lm.q3:>9.4g}"
        row += f"{lg.mean:>11.4g}{lg.q1:>9.4g}{lg.median:>9.4g}{lg.q3:>9.4g}"
        row += "".join(f"{d.coverage[a]['global']:>10.3f}" for a in report.alphas)
        lines.append(row)
    return "\n".join(lines)
