"""Command line front end.

Subcommands:

* ``simulate``: draw assignments, run the dynamics once, write the observed
  outcome, treatment and exposure panels plus a manifest.
* ``estimate``: fit the evolution-based estimators on panel CSVs and write
  coefficient JSON and per-round estimate rows.
* ``benchmark``: Monte Carlo comparison of all configured estimators against
  simulated truth; writes the report as JSON and flat CSV.
* ``sweep``: benchmark along a grid of one dynamics parameter.
* ``demo``: run a built-in dense-network scenario and write a truth versus
  estimate trajectory table. Output bytes depend only on the seed.

All randomness flows from one seed (config ``run.seed`` unless overridden by
``--seed``) through named per-purpose substreams. Errors print a single JSON
line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import design as design_mod
from .config import ConfigError, config_hash, parse_config
from .dynamics import simulate_panel
from .estimators import ScenarioPath
from .harness import ScenarioConfig, failure_sweep, replicate, run_once, structure_of
from .panel import (
    column_mean,
    read_outcome_csv,
    read_treatment_csv,
    round_index_covariates,
    write_matrix_csv,
    write_outcome_csv,
    write_treatment_csv,
)
from .rng import substream

DEMO_CONFIG = """\
[population]
n_units = 800
n_rounds = 4
baseline_mean = 0.0
baseline_sd = 1.0

[weights]
kind = dense_gaussian
mu = 1.0
sigma2 = 1.0

[dynamics]
unit = linear
w_coef = 1.0
y_coef = 0.5
peer = linear
peer_w = 1.5
peer_y = 0.2
exposure = weighted_sum
noise_sd = 0.1

[design]
kind = bernoulli
probs = 0.0, 0.2, 0.4, 0.8

[estimators]
use = dm, ht, ese_basic

[run]
seed = 7
reps = 3
"""


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ValueError, OSError, FloatingPointError) as exc:
        sys.stderr.write(json.dumps({"error": f"{type(exc).__name__}: {exc}"}) + "\n")
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spillsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", type=Path, required=config_required, help="scenario config path")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--reps", type=int, default=None, help="override run.reps")

    p_sim = sub.add_parser("simulate", help="simulate one observed experiment")
    common(p_sim)
    p_sim.set_defaults(handler=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="fit estimators on existing panel CSVs")
    common(p_est)
    p_est.add_argument("--outcomes", type=Path, required=True, help="outcome panel CSV")
    p_est.add_argument("--treatments", type=Path, required=True, help="treatment panel CSV")
    p_est.set_defaults(handler=_cmd_estimate)

    p_bench = sub.add_parser("benchmark", help="Monte Carlo estimator comparison")
    common(p_bench)
    p_bench.set_defaults(handler=_cmd_benchmark)

    p_sweep = sub.add_parser("sweep", help="benchmark along a parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=("trend", "threshold_strength"))
    p_sweep.add_argument("--grid", required=True, help="comma-separated parameter values")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_demo = sub.add_parser("demo", help="run the built-in demo scenario")
    common(p_demo, config_required=False)
    p_demo.set_defaults(handler=_cmd_demo)

    return parser


def _load(args, text: str | None = None) -> tuple[ScenarioConfig, str]:
    if text is None:
        text = args.config.read_text()
    config = parse_config(text)
    import dataclasses

    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        config = dataclasses.replace(config, base_seed=args.seed)
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("--reps must be at least 1")
        config = dataclasses.replace(config, n_reps=args.reps)
    return config, text


def _manifest(outdir: Path, text: str, config: ScenarioConfig, extra: dict | None = None) -> None:
    payload = {
        "version": __version__,
        "config_hash": config_hash(text),
        "seed": config.base_seed,
        "n_reps": config.n_reps,
        "n_units": config.n_units,
        "n_rounds": config.n_rounds,
        "dynamics_hash": config.dynamics.spec_hash(),
    }
    if extra:
        payload.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _cmd_simulate(args) -> int:
    config, text = _load(args)
    outdir = _ensure_outdir(args.out)
    seed = config.base_seed
    weights = config.weights.build(config.n_units, config.n_rounds, seed)
    w_obs = design_mod.assign(config.design, seed)
    x = round_index_covariates(config.n_units, config.n_rounds)
    y0 = config.baseline_mean + config.baseline_sd * substream(seed, "baseline").standard_normal(config.n_units)
    panel, exposure = simulate_panel(config.dynamics, weights, w_obs, x, y0, seed)
    write_outcome_csv(outdir / "outcomes.csv", panel)
    write_treatment_csv(outdir / "treatments.csv", w_obs)
    write_matrix_csv(outdir / "exposure.csv", exposure.values)
    _manifest(outdir, text, config, {"scenario": "observed", "weights": weights.to_descriptor() if config.weights.kind != "explicit" else {"kind": "explicit"}})
    return 0


def _cmd_estimate(args) -> int:
    from .estimators import dm_estimate, fit_ese, ht_estimate, propagate

    config, text = _load(args)
    outdir = _ensure_outdir(args.out)
    y = read_outcome_csv(args.outcomes)
    w = read_treatment_csv(args.treatments)
    if y.n_units != config.n_units or y.n_rounds != config.n_rounds:
        raise ConfigError(
            f"panel is {y.n_units} units x {y.n_rounds} rounds, config says {config.n_units} x {config.n_rounds}"
        )
    weights = config.weights.build(config.n_units, config.n_rounds, config.base_seed)
    structure = structure_of(weights)

    coeff_payload = {}
    rows = []
    for t in range(1, config.n_rounds + 1):
        y_t, w_t = y.column(t), w.column(t)
        for name in config.estimators:
            if name == "dm":
                est = dm_estimate(y_t, w_t)
            elif name == "ht":
                pi = config.design.probs[t - 1] if config.design.kind == "bernoulli" else float(config.design.value)
                est = ht_estimate(y_t, w_t, pi) if 0.0 < pi < 1.0 else None
            else:
                continue
            rows.append((name, t, est))
    for name in config.estimators:
        if name in ("dm", "ht"):
            continue
        spec = config.feature_spec(name, structure)
        coeffs = fit_ese(y, w, spec, structure)
        coeff_payload[name] = coeffs.to_dict()
        y0_mean = column_mean(y, 0)
        hi = propagate(coeffs, spec, y0_mean, ScenarioPath.all_treated(config.n_rounds))
        lo = propagate(coeffs, spec, y0_mean, ScenarioPath.all_control(config.n_rounds))
        for t in range(1, config.n_rounds + 1):
            rows.append((name, t, float(hi[t] - lo[t])))

    (outdir / "coefficients.json").write_text(json.dumps(coeff_payload, sort_keys=True, indent=2) + "\n")
    _write_estimates_csv(outdir / "estimates.csv", rows)
    _manifest(outdir, text, config, {"inputs": [str(args.outcomes), str(args.treatments)]})
    return 0


def _write_estimates_csv(path: Path, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "round", "estimate"])
        for name, t, est in sorted(rows, key=lambda r: (r[0], r[1])):
            writer.writerow([name, t, "" if est is None else repr(est)])


def _cmd_benchmark(args) -> int:
    config, text = _load(args)
    outdir = _ensure_outdir(args.out)
    report = replicate(config)
    report.write_json(outdir / "report.json")
    report.write_csv(outdir / "report.csv")
    _manifest(outdir, text, config)
    print(f"benchmark: {config.n_reps} replications in {report.runtime_seconds:.1f}s -> {outdir}")
    return 0


def _cmd_sweep(args) -> int:
    config, text = _load(args)
    outdir = _ensure_outdir(args.out)
    grid = [float(v) for v in str(args.grid).split(",") if v.strip() != ""]
    table = failure_sweep(config, args.param, grid)
    table.write_csv(outdir / "sweep.csv")
    _manifest(outdir, text, config, {"sweep_parameter": args.param, "grid": grid})
    return 0


def _cmd_demo(args) -> int:
    config, text = _load(args, text=DEMO_CONFIG)
    outdir = _ensure_outdir(args.out)
    record = run_once(config, config.base_seed)
    report = replicate(config)

    rows = []
    for t in range(config.n_rounds + 1):
        row = {
            "round": t,
            "gt_control": record.gt_control[t],
            "gt_treated": record.gt_treated[t],
        }
        for name, (lo, hi) in sorted(record.ese_trajectories.items()):
            row[f"{name}_control"] = lo[t]
            row[f"{name}_treated"] = hi[t]
        rows.append(row)
    _write_trajectories_csv(outdir / "trajectories.csv", rows)

    import csv

    with open(outdir / "estimates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "estimate", "gt", "bias", "mean_bias", "rmse"])
        for name in sorted(record.estimates):
            est = record.estimates[name]
            summary = report.summaries[name]
            writer.writerow(
                [
                    name,
                    "" if est is None else repr(est),
                    repr(record.gt_tte),
                    "" if est is None else repr(est - record.gt_tte),
                    repr(summary.bias),
                    repr(summary.rmse),
                ]
            )
    _manifest(outdir, text, config, {"scenario": "demo"})
    return 0


def _write_trajectories_csv(path: Path, rows: list[dict]) -> None:
    import csv

    if not rows:
        raise ValueError("no trajectory rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row["round"], *[repr(float(row[k])) for k in fields[1:]]])


def _ensure_outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


if __name__ == "__main__":
    sys.exit(main())
