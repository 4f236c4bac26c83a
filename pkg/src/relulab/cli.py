"""Command-line entry point: sweeps, lemma suite, oracles, bounds.

Exit codes: 0 on success, 1 on validation errors (bad config, bad flags),
2 when a checked property fails (lemma violation, unsatisfied bound, oracle
mismatch, realization error above tolerance).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .bayes import Prior
from .embedding import (
    EssentialSampleConfig,
    SUPPORT_MODES,
    TrueModel,
    bounded_bias_floor,
    embed_true_network,
    learning_coefficient_bound,
    sample_essential_params,
    verify_realization,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    fit_lambda,
    run_sweep,
    validate_oracle,
)
from .freeenergy import free_energy_upper_bound
from .network import Architecture
from .properties import run_lemma_suite
from . import reporting

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PROPERTY = 2

REALIZATION_TOL = 1e-9
BOUND_N_GRID = (100, 1000, 10_000)
BOUND_SLOPE_RTOL = 0.15


def _add_common_flags(parser: argparse.ArgumentParser, *, config_required: bool) -> None:
    parser.add_argument(
        "--config", required=config_required, help="path to a JSON experiment config"
    )
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--support-mode",
        choices=list(SUPPORT_MODES),
        default=None,
        help="input-support mode override",
    )
    parser.add_argument(
        "--output-activation",
        choices=["relu", "linear"],
        default=None,
        help="output-activation override for both networks",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relulab",
        description="Bayesian free-energy experiments for overparametrized ReLU networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext, config_required in (
        ("lambda", "print the learning-coefficient bound for a network pair", True),
        ("embed-check", "build and verify exact embedding parameters", True),
        ("sweep", "run a free-energy sweep and fit the log n slope", True),
        ("lemmas", "run the full property suite", False),
        ("oracle", "validate the estimators against exact references", False),
        ("bound", "evaluate the volume upper-bound curve", True),
    ):
        sub_parser = sub.add_parser(name, help=helptext)
        _add_common_flags(sub_parser, config_required=config_required)
    return parser


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _arch_pair(data: dict, output_activation: str | None) -> tuple[Architecture, Architecture]:
    try:
        arch_true = Architecture.from_json_dict(data["true_model"]["architecture"])
        arch_model = Architecture.from_json_dict(data["model"])
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from exc
    if output_activation is not None:
        arch_true = Architecture(arch_true.widths, output_activation)
        arch_model = Architecture(arch_model.widths, output_activation)
    return arch_true, arch_model


def _resolve_mode(data: dict, override: str | None) -> str:
    if override is not None:
        return override
    dist = data.get("true_model", {}).get("input_dist")
    if dist is not None:
        from .embedding import InputDistSpec

        return InputDistSpec.from_json_dict(dist).support_mode
    return "general"


def _out_dir(args, config: ExperimentConfig | None = None) -> str:
    if args.out is not None:
        out = args.out
    elif config is not None and config.out_dir is not None:
        out = config.out_dir
    else:
        out = "."
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_lambda(args) -> int:
    data = _load_json(args.config)
    arch_true, arch_model = _arch_pair(data, args.output_activation)
    mode = _resolve_mode(data, args.support_mode)
    lam = learning_coefficient_bound(arch_true, arch_model, mode)
    print(
        f"lambda_relu = {lam} = {float(lam)} "
        f"(true {arch_true.widths} -> model {arch_model.widths}, {mode} support)"
    )
    return EXIT_OK


def _cmd_embed_check(args) -> int:
    data = _load_json(args.config)
    true_model = TrueModel.from_json_dict(data["true_model"])
    _, arch_model = _arch_pair(data, args.output_activation)
    if args.output_activation is not None:
        true_model = TrueModel(
            Architecture(true_model.arch.widths, args.output_activation),
            true_model.params,
            true_model.input_dist,
        )
    seed = 0 if args.seed is None else args.seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    params = embed_true_network(true_model, arch_model, rng)
    dev = verify_realization(true_model, arch_model, params, 1000, rng)
    print(f"optimal-parameter max deviation over 1000 inputs: {dev:.3e}")

    mode = _resolve_mode(data, args.support_mode)
    n_scale = 10_000
    config = EssentialSampleConfig(
        n=n_scale,
        delta=0.05,
        support_mode=mode,
        bounded_bias_floor=(
            bounded_bias_floor(true_model.input_dist) if mode == "bounded" else 0.0
        ),
    )
    sample = sample_essential_params(true_model, arch_model, config, rng)
    sample_dev = verify_realization(true_model, arch_model, sample, 1000, rng)
    print(
        f"essential-set sample deviation at n={n_scale} ({mode} mode): {sample_dev:.3e}"
    )
    if dev > REALIZATION_TOL:
        print(f"realization deviation exceeds {REALIZATION_TOL}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        object.__setattr__(config, "seed", args.seed)
    if args.support_mode is not None:
        object.__setattr__(config, "support_mode", args.support_mode)
    out = _out_dir(args, config)
    csv_path = os.path.join(out, "sweep.csv")
    rung_path = os.path.join(out, "rungs.csv")
    result = run_sweep(config, csv_path=csv_path, rung_csv_path=rung_path)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    fit = fit_lambda(result.rows, config.lambda_bound)
    reporting.write_slope_json(fit, os.path.join(out, "slope.json"))
    reporting.plot_sweep(result, fit, os.path.join(out, "sweep.png"))
    for n, mean in zip(fit.n_values, fit.mean_deviations):
        print(f"n={n}: mean(F - n S_n) = {mean:.4f}")
    print(
        f"lambda_hat = {fit.lambda_hat:.4f} +- {fit.slope_stderr:.4f}, "
        f"bound = {fit.lambda_bound:g}, margin = {fit.margin:.4f}, "
        f"satisfied = {fit.satisfied}"
    )
    print(f"outputs in {out}: sweep.csv, rungs.csv, slope.json, sweep.png")
    return EXIT_OK if fit.satisfied else EXIT_PROPERTY


def _cmd_lemmas(args) -> int:
    seed = 0 if args.seed is None else args.seed
    results = run_lemma_suite(seed=seed, trials=10_000)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        warn = " [warning]" if result.warning else ""
        print(f"{status} {result.name}: {result.detail}{warn}")
        failed += 0 if result.passed else 1
    print(f"{len(results) - failed}/{len(results)} properties passed")
    return EXIT_OK if failed == 0 else EXIT_PROPERTY


def _cmd_oracle(args) -> int:
    seed = 0 if args.seed is None else args.seed
    ok = True
    for n in (50, 20):
        report = validate_oracle(n, seed)
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            print(
                f"{status} n={n} {check.name}: TI={check.ti_value:.4f} "
                f"ref={check.reference_value:.4f} |err|={check.abs_error:.4f} "
                f"(tol {check.threshold})"
            )
        ok = ok and report.passed
    return EXIT_OK if ok else EXIT_PROPERTY


def _cmd_bound(args) -> int:
    data = _load_json(args.config)
    true_model = TrueModel.from_json_dict(data["true_model"])
    _, arch_model = _arch_pair(data, args.output_activation)
    mode = _resolve_mode(data, args.support_mode)
    prior = Prior(float(data.get("prior_half_width", 5.0)))
    seed = data.get("seed", 0) if args.seed is None else args.seed
    lam = float(learning_coefficient_bound(true_model.arch, arch_model, mode))
    from .bayes import entropy_true

    s_true = entropy_true(true_model)
    delta = max(0.05, 2.0 / math.sqrt(min(BOUND_N_GRID)))
    points = []
    for n in BOUND_N_GRID:
        config = EssentialSampleConfig(
            n=n,
            delta=delta,
            support_mode=mode,
            bounded_bias_floor=(
                bounded_bias_floor(true_model.input_dist) if mode == "bounded" else 0.0
            ),
        )
        bound = free_energy_upper_bound(
            true_model,
            arch_model,
            prior,
            n,
            config,
            rng=np.random.default_rng(np.random.SeedSequence([seed, n])),
        )
        points.append((n, bound, bound - n * s_true))
        print(f"n={n}: bound = {bound:.3f}, bound - nS = {points[-1][2]:.3f}")
    slope = float(
        np.polyfit(np.log([p[0] for p in points]), [p[2] for p in points], 1)[0]
    )
    rel = abs(slope - lam) / lam
    print(f"bound slope = {slope:.3f}, lambda = {lam:g}, relative gap = {rel:.3f}")
    out = _out_dir(args)
    reporting.write_bound_csv(points, os.path.join(out, "bound.csv"))
    reporting.plot_bound_curve(points, lam, os.path.join(out, "bound.png"))
    print(f"outputs in {out}: bound.csv, bound.png")
    return EXIT_OK if rel <= BOUND_SLOPE_RTOL else EXIT_PROPERTY


_COMMANDS = {
    "lambda": _cmd_lambda,
    "embed-check": _cmd_embed_check,
    "sweep": _cmd_sweep,
    "lemmas": _cmd_lemmas,
    "oracle": _cmd_oracle,
    "bound": _cmd_bound,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold that into the validation code
        code = exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
        return EXIT_OK if code == 0 else EXIT_VALIDATION
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
