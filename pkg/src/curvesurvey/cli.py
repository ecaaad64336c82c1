"""Command-line interface: ``curvesurvey <subcommand> ...``.

Subcommands: generate, stratify, allocate, estimate, experiment. Designs and
experiments are described in JSON (inline or as a file path); flags override
individual fields. Numbers in outputs other than population CSVs carry 12
significant digits so that repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import allocate, bands, mc
from .design import design_from_config
from .errors import CurveSurveyError
from .estimate import ht_covariance_estimate, ht_mean, true_covariance
from .population import (
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    save_csv,
    stratify_by_max_level,
    trapezoid_integral,
)

log = logging.getLogger("curvesurvey")

DEFAULT_SEED = 0
DEFAULT_ALPHAS = (0.05,)


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.{mc.SIG_DIGITS}g}"


def _json_arg(text):
    """Parse inline JSON, or read it from a file when ``text`` is a path."""
    if text is None:
        return None
    stripped = text.strip()
    if not stripped.startswith(("{", "[")):
        try:
            stripped = Path(text).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read {text}: {exc}") from exc
    try:
        return json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {text!r}: {exc}") from exc


def _write_json(data, path):
    text = json.dumps(data, indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args):
    config = _json_arg(args.config) or {}
    for key in ("N", "d", "H", "seed", "amplitude_spread", "noise_smoothness", "noise_level"):
        value = getattr(args, key)
        if value is not None:
            config[key] = value
    try:
        spec = SyntheticSpec(**config)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid synthetic spec: {exc}") from exc
    pop = generate_synthetic(spec)
    save_csv(pop, args.out)
    log.info("wrote %d curves on %d points to %s", pop.N, pop.d, args.out)


def cmd_stratify(args):
    pop = load_csv(args.pop)
    aux = load_csv(args.auxiliary).values if args.auxiliary else None
    save_csv(stratify_by_max_level(pop, args.H, aux), args.out)


def cmd_allocate(args):
    pop = load_csv(args.pop)
    if pop.strata is None:
        raise UsageError("strata required: the population file has no stratum column")
    summaries = allocate.stratum_summaries(pop)
    report = {
        "n": args.n,
        "N_h": [s.N_h for s in summaries],
        "proportional": allocate.proportional_allocation(summaries, args.n).to_dict(),
        "optimal": allocate.optimal_allocation(summaries, args.n).to_dict(),
    }
    for rule in ("proportional", "optimal"):
        entry = report[rule]
        entry["objective"] = float(_fmt(entry["objective"]))
        entry["S_h"] = [float(_fmt(s)) for s in entry["S_h"]]
        if min(entry["n_h"]) < 2:
            log.warning("%s allocation has a stratum with n_h < 2: variance not estimable", rule)
    _write_json(report, args.out)


def cmd_estimate(args):
    pop = load_csv(args.pop)
    config = _json_arg(args.design)
    if not isinstance(config, dict):
        raise UsageError("--design must be a JSON object")
    try:
        design = design_from_config(config, pop)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid design: {exc}") from exc
    alphas = args.alpha or list(DEFAULT_ALPHAS)

    sample = design.draw(args.seed)
    mean = ht_mean(pop, sample)
    cov = ht_covariance_estimate(pop, sample, diagonal_only=args.diag_only)
    var = cov.variance_diag
    sd = np.sqrt(np.maximum(var, 0.0))

    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,mean,var,sd,lower,upper,kind,alpha\n")
        for alpha in alphas:
            half = bands.scale(alpha, args.kind) * sd
            for j, t in enumerate(pop.grid.points):
                row = [t, mean[j], var[j], sd[j], mean[j] - half[j], mean[j] + half[j]]
                fh.write(",".join(_fmt(v) for v in row) + f",{args.kind},{_fmt(alpha)}\n")
    if cov.covariance is not None:
        np.savetxt(out.with_suffix(".cov.csv"), cov.covariance, fmt="%.12g", delimiter=",")

    truth = true_covariance(pop, design)
    sidecar = {
        "seed": sample.seed,
        "design": config,
        "N": pop.N,
        "n": design.n,
        "n_h": design.n_h.tolist(),
        "sample_units": [pop.unit_ids[k] for k in sample.indices],
        "integrated_true_variance": float(_fmt(truth.integral())),
        "integrated_estimated_variance": float(_fmt(trapezoid_integral(var, pop.grid))),
        "negative_variance_points": cov.n_negative,
        "alphas": [float(_fmt(a)) for a in alphas],
        "kind": args.kind,
    }
    _write_json(sidecar, out.with_suffix(out.suffix + ".json"))


def cmd_experiment(args):
    data = _json_arg(args.config) or {}
    if not isinstance(data, dict):
        raise UsageError("experiment config must be a JSON object")
    if args.pop:
        data["population"] = args.pop
    if args.replicates is not None:
        data["replicates"] = args.replicates
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.alpha:
        data["alphas"] = args.alpha
    if args.design:
        designs = _json_arg(args.design)
        data["designs"] = designs if isinstance(designs, list) else [designs]
    try:
        spec = mc.ExperimentSpec.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid experiment spec: {exc}") from exc

    report = mc.run_experiment(spec, workers=mc.default_workers())
    mc.write_report(report, args.out)
    log.info("finished %d replicates in %.1f s", spec.replicates, report.elapsed_seconds)
    if args.verbose:
        print(mc.format_table(report), file=sys.stderr)
    failed = [d for d in report.designs if not d.ok]
    for d in failed:
        print(f"design {d.name} failed: {d.error}", file=sys.stderr)
    return 1 if failed else 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvesurvey",
        description="Horvitz-Thompson estimation of mean curves from survey samples.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic population CSV")
    p.add_argument("--config", help="SyntheticSpec as JSON or a JSON file")
    p.add_argument("--N", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--seed", type=int, help="generator seed")
    p.add_argument("--amplitude-spread", dest="amplitude_spread", type=float)
    p.add_argument("--noise-smoothness", dest="noise_smoothness", type=float)
    p.add_argument("--noise-level", dest="noise_level", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stratify", help="quantile strata by maximum level")
    p.add_argument("--pop", required=True)
    p.add_argument("--H", type=int, default=4)
    p.add_argument("--auxiliary", help="population CSV whose maxima define the strata")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stratify)

    p = sub.add_parser("allocate", help="proportional and optimal allocations")
    p.add_argument("--pop", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="JSON output (stdout when omitted)")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("estimate", help="draw one sample and estimate the mean curve")
    p.add_argument("--pop", required=True)
    p.add_argument("--design", required=True, help="design JSON or JSON file")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sample seed (default 0)")
    p.add_argument("--alpha", type=float, action="append", help="band risk level, repeatable (default 0.05)")
    p.add_argument("--kind", choices=bands.KINDS, default="global", help="band type (default global)")
    p.add_argument(
        "--diag-only",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="estimate only the variance function; --no-diag-only also writes the covariance matrix",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="Monte Carlo comparison of designs")
    p.add_argument("--config", help="ExperimentSpec JSON or JSON file")
    p.add_argument("--pop", help="population CSV (overrides the config)")
    p.add_argument("--design", help="design JSON object or list (overrides the config)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--alpha", type=float, action="append", help="risk level, repeatable")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    logging.captureWarnings(True)
    try:
        return args.func(args) or 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CurveSurveyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
