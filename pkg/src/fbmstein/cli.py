"""Command-line orchestration: configure, run, persist with a manifest.

Subcommands: simulate, risk, dominance-sweep, stein-check, kernel-table,
girsanov-check. Exit status 1 flags configuration errors (one-line
diagnostic), 2 numerical failures. All outputs land under --out:
manifest.txt plus the subcommand's CSV (and SVG for the sweep).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import reports
from .config import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    apply_overrides,
    load_config,
    write_manifest,
)
from .drift import (
    DriftSpec,
    builtin_drift,
    change_of_measure_check,
    girsanov_mean_one_check,
)
from .fracops import fbm_kernel
from .model import FbmModel, RngStream
from .risk import (
    quadratic_risk_mc,
    risk_difference_paired_multi,
    stein_identity_check,
)
from .shrinkage import R_FUNCTIONS, ShrinkageSpec, make_estimator
from .simulate import (
    CirculantEmbeddingError,
    CovarianceFactorizationError,
    add_drift,
    path_to_csv,
    simulate_fbm,
)

_SUBCOMMANDS = (
    "simulate",
    "risk",
    "dominance-sweep",
    "stein-check",
    "kernel-table",
    "girsanov-check",
)


def _model(config: ExperimentConfig) -> FbmModel:
    return FbmModel(config.d, config.hurst, config.T, config.n)


def _drift(config: ExperimentConfig, model: FbmModel) -> DriftSpec:
    return builtin_drift(config.drift_label, model, c=config.drift_c)


def _estimator(config: ExperimentConfig, model: FbmModel):
    if config.estimator_label == "js":
        spec = ShrinkageSpec(config.estimator_a, R_FUNCTIONS[config.estimator_r], model.hurst)
        return make_estimator("custom", spec=spec) if config.estimator_r != "one" else \
            make_estimator("js", model, a=config.estimator_a)
    return make_estimator(config.estimator_label, model, a=config.estimator_a)


def _shrinkage_spec(config: ExperimentConfig, model: FbmModel, a=None) -> ShrinkageSpec:
    return ShrinkageSpec(config.estimator_a if a is None else a,
                         R_FUNCTIONS[config.estimator_r], model.hurst)


def _cmd_simulate(config, manifest):
    model = _model(config)
    path = simulate_fbm(model, config.method, RngStream(config.seed, 0))
    if config.drift_label != "zero":
        path = add_drift(path, _drift(config, model))
    text = path_to_csv(path)
    reports.write_text(config.out, "paths.csv", text)
    manifest.add_result("paths.csv", model.n + 1)
    return [f"paths.csv: one {config.method} path, {model.n + 1} grid rows"]


def _cmd_risk(config, manifest):
    model = _model(config)
    estimate = quadratic_risk_mc(
        _estimator(config, model), _drift(config, model), model,
        config.method, config.n_reps, config.seed,
    )
    rows = [reports.risk_row(config, estimate)]
    n = reports.write_csv(config.out, "risk.csv", reports.RISK_HEADER, rows)
    manifest.add_result("risk.csv", n)
    return [f"risk.csv: mean={estimate.mean:.6g} se={estimate.std_error:.3g}"]


def _cmd_dominance_sweep(config, manifest):
    model = _model(config)
    if not config.sweep_a:
        raise ConfigError("dominance-sweep needs a non-empty sweep.a list")
    drift = _drift(config, model)
    configs = [(_shrinkage_spec(config, model, a=a), drift) for a in config.sweep_a]
    results = risk_difference_paired_multi(configs, model, config.method,
                                           config.n_reps, config.seed)
    rows = [reports.dominance_row(config, rep) for rep in results]
    n = reports.write_csv(config.out, "dominance.csv", reports.DOMINANCE_HEADER, rows)
    manifest.add_result("dominance.csv", n)
    svg = reports.render_dominance_svg(
        list(config.sweep_a),
        [rep.delta_mean for rep in results],
        [1.96 * rep.delta_std_error for rep in results],
        title=f"risk difference vs a (d={config.d}, H={config.hurst:g}, r={config.estimator_r})",
    )
    reports.write_text(config.out, "dominance.svg", svg)
    manifest.add_result("dominance.svg", len(config.sweep_a))
    lines = [
        f"a={rep_a:g}: delta={rep.delta_mean:.6g} ci95_upper={rep.ci95_upper:.6g}"
        for rep_a, rep in zip(config.sweep_a, results)
    ]
    return ["dominance.csv + dominance.svg"] + lines


def _cmd_stein_check(config, manifest):
    model = _model(config)
    theta = np.asarray(config.stein_theta, dtype=float)
    if theta.size == 0:
        theta = np.zeros(config.d)
    if theta.size != config.d:
        raise ConfigError(
            f"stein.theta has {theta.size} entries but d = {config.d}"
        )
    spec = _shrinkage_spec(config, model)
    check = stein_identity_check(spec, config.stein_t, theta, config.n_reps, config.seed)
    header = ["a", "r", "H", "d", "t", "n_samples", "seed", "lhs", "rhs",
              "lhs_std_error", "rhs_std_error", "combined_std_error"]
    rows = [[spec.a, spec.r.label, config.hurst, config.d, config.stein_t,
             check.n_samples, check.seed, check.lhs, check.rhs,
             check.lhs_std_error, check.rhs_std_error, check.combined_std_error]]
    n = reports.write_csv(config.out, "stein.csv", header, rows)
    manifest.add_result("stein.csv", n)
    return [f"stein.csv: lhs={check.lhs:.6g} rhs={check.rhs:.6g} "
            f"combined_se={check.combined_std_error:.3g}"]


def _cmd_kernel_table(config, manifest):
    model = _model(config)
    grid = model.grid
    rows = []
    for t in grid:
        vals = fbm_kernel(np.full(grid.size, t), grid, model.hurst)
        rows.extend([float(t), float(s), float(v)] for s, v in zip(grid, vals))
    n = reports.write_csv(config.out, "kernel.csv", ["t", "s", "K"], rows)
    manifest.add_result("kernel.csv", n)
    return [f"kernel.csv: {n} (t, s) pairs"]


def _cmd_girsanov_check(config, manifest):
    model = _model(config)
    if model.hurst > 0.5:
        raise ConfigError("girsanov-check requires hurst <= 0.5")
    drift = _drift(config, model)
    mean_one = girsanov_mean_one_check(drift, model, config.n_reps, config.seed)
    com = change_of_measure_check(drift, model, config.n_reps, config.seed)
    header = ["drift", "d", "H", "T", "n", "n_reps", "seed",
              "mean_exp", "mean_exp_std_error",
              "weighted_mean", "weighted_std_error",
              "shifted_mean", "shifted_std_error", "combined_std_error"]
    rows = [[drift.label, config.d, config.hurst, config.T, config.n,
             config.n_reps, config.seed, mean_one.mean, mean_one.std_error,
             com.weighted_mean, com.weighted_std_error,
             com.shifted_mean, com.shifted_std_error, com.combined_std_error]]
    n = reports.write_csv(config.out, "girsanov.csv", header, rows)
    manifest.add_result("girsanov.csv", n)
    return [
        f"girsanov.csv: E[exp(L)]={mean_one.mean:.6g} (se {mean_one.std_error:.3g}), "
        f"measure-change gap={com.weighted_mean - com.shifted_mean:.6g} "
        f"(combined se {com.combined_std_error:.3g})"
    ]


_HANDLERS = {
    "simulate": _cmd_simulate,
    "risk": _cmd_risk,
    "dominance-sweep": _cmd_dominance_sweep,
    "stein-check": _cmd_stein_check,
    "kernel-table": _cmd_kernel_table,
    "girsanov-check": _cmd_girsanov_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmstein",
        description="Drifted fractional Brownian motion: simulation, "
        "shrinkage estimators, Monte Carlo risk experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config file (defaults apply if omitted)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--reps", type=int, help="replicate count (overrides config)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary lines")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        config = apply_overrides(config, seed=args.seed, n_reps=args.reps, out=args.out)
        manifest = RunManifest(args.command, config)
        manifest.start()
        summary = _HANDLERS[args.command](config, manifest)
        manifest.finish()
        write_manifest(config.out, manifest)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CirculantEmbeddingError, CovarianceFactorizationError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"[{args.command}] outputs in {config.out}")
        for line in summary:
            print("  " + line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
