"""Sweep configuration, free-energy sweeps, slope fits, and oracle validation.

A sweep draws datasets of increasing size from a fixed true network, estimates
the free energy of an overparametrized model on each, and fits the log n
coefficient of F_n - n S_n. The fitted slope is then compared against the
volume-based learning-coefficient bound.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .bayes import (
    Dataset,
    ParameterSpace,
    Prior,
    empirical_entropy,
    generate_dataset,
)
from .embedding import (
    InputDistSpec,
    SUPPORT_MODES,
    TrueModel,
    embed_true_network,
    learning_coefficient_bound,
    require_compatible,
)
from .freeenergy import (
    QUADRATURE_MAX_DIM,
    free_energy_quadrature,
    free_energy_ti,
)
from .mcmc import McmcSettings, TemperatureLadder
from .network import Architecture, Parameters

CSV_HEADER = ("n", "rep", "seed", "F_hat", "F_stderr", "S_n", "F_minus_nSn", "method")
RUNG_CSV_HEADER = ("n", "rep", "rung", "beta", "mean_ll", "acceptance", "ess")


class ConfigError(ValueError):
    """Raised when an experiment configuration is invalid."""


# ---------------------------------------------------------------------------
# Low-dimensional test models with free dimension 1, 2, 3
# ---------------------------------------------------------------------------


def scalar_mean_model() -> tuple[TrueModel, ParameterSpace]:
    """One free parameter: the output bias of a weight-pinned (1,1) net."""
    arch = Architecture((1, 1), "linear")
    params = Parameters((np.array([[0.0]]),), (np.array([0.5]),))
    true_model = TrueModel(arch, params, InputDistSpec("gaussian_standard", 1))
    space = ParameterSpace.pinned(arch, params, [1])
    return true_model, space


def two_param_relu_model() -> tuple[TrueModel, ParameterSpace]:
    """Two free weights through one hidden unit; biases pinned at zero."""
    arch = Architecture((1, 1, 1), "linear")
    params = Parameters(
        (np.array([[1.0]]), np.array([[1.0]])),
        (np.array([0.0]), np.array([0.0])),
    )
    true_model = TrueModel(arch, params, InputDistSpec("gaussian_standard", 1))
    space = ParameterSpace.pinned(arch, params, [0, 2])
    return true_model, space


def three_param_relu_model() -> tuple[TrueModel, ParameterSpace]:
    """Two free hidden weights plus a free output bias on a (1,2,1) net."""
    arch = Architecture((1, 2, 1), "linear")
    params = Parameters(
        (np.array([[1.0], [-0.5]]), np.array([[1.0, 1.0]])),
        (np.array([0.0, 0.0]), np.array([0.25])),
    )
    true_model = TrueModel(arch, params, InputDistSpec("gaussian_standard", 1))
    space = ParameterSpace.pinned(arch, params, [0, 1, 6])
    return true_model, space


def oracle_test_models() -> dict[str, tuple[TrueModel, ParameterSpace]]:
    """The registered quadrature-tractable models keyed by free dimension."""
    return {
        "scalar_mean": scalar_mean_model(),
        "two_param_relu": two_param_relu_model(),
        "three_param_relu": three_param_relu_model(),
    }


def conjugate_free_energy_exact(dataset: Dataset, prior: Prior) -> float:
    """Closed-form F_n for the scalar-mean model under the uniform box prior.

    Integrating the Gaussian likelihood in the single mean parameter over
    [-B, B] gives F_n in terms of the sample mean, the centered sum of
    squares, and a difference of normal CDFs.
    """
    y = dataset.outputs[:, 0]
    n = dataset.n
    b = prior.half_width
    ybar = float(y.mean())
    ss = float(((y - ybar) ** 2).sum())
    root_n = math.sqrt(n)
    delta_phi = float(norm.cdf(root_n * (b - ybar)) - norm.cdf(root_n * (-b - ybar)))
    return (
        math.log(2.0 * b)
        + 0.5 * n * math.log(2.0 * math.pi)
        + 0.5 * ss
        - 0.5 * math.log(2.0 * math.pi / n)
        - math.log(delta_phi)
    )


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


def _ladder_schedule_json(ladder: TemperatureLadder) -> dict:
    """Compact {rungs, power} form when the betas match one, else explicit."""
    rungs = len(ladder.betas) - 1
    if rungs >= 2 and ladder.betas[1] > 0.0:
        power = math.log(ladder.betas[1]) / math.log(1.0 / rungs)
        rebuilt = tuple((j / rungs) ** power for j in range(rungs + 1))
        if all(abs(a - b) <= 1e-12 for a, b in zip(rebuilt, ladder.betas)):
            return {"rungs": rungs, "power": power}
    return {"betas": list(ladder.betas)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a sweep: models, prior, ladder, seeds."""

    true_model: TrueModel
    model_arch: Architecture
    prior: Prior
    ladder: TemperatureLadder
    n_grid: tuple[int, ...]
    replications: int
    seed: int
    support_mode: str | None = None
    pin_to_truth: bool = False
    quadrature_points: int = 200
    out_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        try:
            require_compatible(self.true_model.arch, self.model_arch)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.true_model.arch.output_activation != self.model_arch.output_activation:
            raise ConfigError("true and model output activations must match")
        if len(self.n_grid) < 3:
            raise ConfigError("n_grid needs at least 3 values for a slope fit")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be positive")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ConfigError("n_grid must be strictly ascending")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.support_mode is not None and self.support_mode not in SUPPORT_MODES:
            raise ConfigError(f"support_mode must be one of {SUPPORT_MODES}")
        if self.quadrature_points < 2:
            raise ConfigError("quadrature_points must be at least 2")
        try:
            self.prior.validate_for(self.true_model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def resolved_support_mode(self) -> str:
        return self.support_mode or self.true_model.input_dist.support_mode

    @property
    def lambda_bound(self) -> float:
        return float(
            learning_coefficient_bound(
                self.true_model.arch, self.model_arch, self.resolved_support_mode
            )
        )

    def to_json_dict(self) -> dict:
        ladder = _ladder_schedule_json(self.ladder)
        ladder.update(
            {
                "steps": self.ladder.settings.steps,
                "burn_in": self.ladder.settings.burn_in,
                "thin": self.ladder.settings.thin,
                "initial_scale": self.ladder.settings.initial_scale,
                "adapt_interval": self.ladder.settings.adapt_interval,
                "exchange_every": self.ladder.exchange_every,
            }
        )
        out = {
            "true_model": self.true_model.to_json_dict(),
            "model": self.model_arch.to_json_dict(),
            "prior_half_width": self.prior.half_width,
            "ladder": ladder,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "seed": self.seed,
            "pin_to_truth": self.pin_to_truth,
            "quadrature_points": self.quadrature_points,
        }
        if self.support_mode is not None:
            out["support_mode"] = self.support_mode
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            true_model = TrueModel.from_json_dict(data["true_model"])
            model_arch = Architecture.from_json_dict(data["model"])
            ladder_data = dict(data.get("ladder", {}))
            settings = McmcSettings(
                steps=int(ladder_data.get("steps", 1500)),
                burn_in=int(ladder_data.get("burn_in", 500)),
                initial_scale=float(ladder_data.get("initial_scale", 0.5)),
                thin=int(ladder_data.get("thin", 1)),
                adapt_interval=int(ladder_data.get("adapt_interval", 25)),
            )
            exchange = ladder_data.get("exchange_every")
            exchange = None if exchange is None else int(exchange)
            if "betas" in ladder_data:
                ladder = TemperatureLadder(
                    tuple(float(b) for b in ladder_data["betas"]),
                    settings,
                    exchange_every=exchange,
                )
            else:
                ladder = TemperatureLadder.power_schedule(
                    rungs=int(ladder_data.get("rungs", 32)),
                    power=float(ladder_data.get("power", 5.0)),
                    settings=settings,
                    exchange_every=exchange,
                )
            return cls(
                true_model=true_model,
                model_arch=model_arch,
                prior=Prior(float(data.get("prior_half_width", 5.0))),
                ladder=ladder,
                n_grid=tuple(int(n) for n in data["n_grid"]),
                replications=int(data.get("replications", 1)),
                seed=int(data.get("seed", 0)),
                support_mode=data.get("support_mode"),
                pin_to_truth=bool(data.get("pin_to_truth", False)),
                quadrature_points=int(data.get("quadrature_points", 200)),
                out_dir=data.get("out_dir"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        config = cls.from_json_dict(data)
        if config.out_dir is not None and not os.path.isabs(config.out_dir):
            resolved = os.path.join(os.path.dirname(os.path.abspath(path)), config.out_dir)
            object.__setattr__(config, "out_dir", resolved)
        return config


def model_space(config: ExperimentConfig) -> ParameterSpace:
    """Free-parameter space of the sweep: full, or fully pinned to the truth."""
    if config.pin_to_truth:
        params = embed_true_network(
            config.true_model,
            config.model_arch,
            np.random.default_rng(np.random.SeedSequence([config.seed])),
        )
        return ParameterSpace.pinned(config.model_arch, params, [])
    return ParameterSpace.full(config.model_arch)


# ---------------------------------------------------------------------------
# Sweep execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """One free-energy estimate: a (sample size, replication) cell."""

    n: int
    rep: int
    seed: int
    f_hat: float
    f_stderr: float
    s_n: float
    f_minus_n_sn: float
    method: str

    def csv_fields(self) -> list[str]:
        return [
            str(self.n),
            str(self.rep),
            str(self.seed),
            repr(self.f_hat),
            repr(self.f_stderr),
            repr(self.s_n),
            repr(self.f_minus_n_sn),
            self.method,
        ]


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    rung_records: tuple[dict, ...]
    warnings: tuple[str, ...]


def _row_seed(config_seed: int, n: int, rep: int) -> int:
    """Deterministic per-cell dataset seed derived from the config seed."""
    return int(np.random.SeedSequence([config_seed, n, rep]).generate_state(1)[0])


def run_sweep(
    config: ExperimentConfig,
    csv_path: str | None = None,
    rung_csv_path: str | None = None,
    progress=None,
) -> SweepResult:
    """Estimate F_n for every (n, replication) cell, streaming CSV rows.

    Cells run in canonical order (ascending n, then replication). Each row is
    written and flushed before the next cell starts, so an interrupted sweep
    leaves a valid prefix on disk. `progress`, when given, is called with each
    completed SweepRow after its flush.
    """
    space = model_space(config)
    use_quadrature = space.free_dim <= QUADRATURE_MAX_DIM
    rows: list[SweepRow] = []
    rungs: list[dict] = []
    warnings: list[str] = []

    csv_handle = open(csv_path, "w", encoding="utf-8", newline="") if csv_path else None
    rung_handle = (
        open(rung_csv_path, "w", encoding="utf-8", newline="") if rung_csv_path else None
    )
    try:
        if csv_handle:
            csv_handle.write(",".join(CSV_HEADER) + "\n")
            csv_handle.flush()
        if rung_handle:
            rung_handle.write(",".join(RUNG_CSV_HEADER) + "\n")
            rung_handle.flush()
        for n in config.n_grid:
            for rep in range(config.replications):
                seed = _row_seed(config.seed, n, rep)
                dataset = generate_dataset(config.true_model, n, seed)
                if use_quadrature:
                    estimate = free_energy_quadrature(
                        space,
                        dataset,
                        config.prior,
                        config.quadrature_points,
                        refinement_check=False,
                    )
                else:
                    chain_rng = np.random.default_rng(
                        np.random.SeedSequence([config.seed, n, rep, 1])
                    )
                    estimate = free_energy_ti(
                        space, dataset, config.prior, config.ladder, chain_rng
                    )
                    for record in estimate.diagnostics["rungs"]:
                        rungs.append({"n": n, "rep": rep, **record})
                    low = estimate.diagnostics["low_acceptance_rungs"]
                    if low:
                        warnings.append(f"n={n} rep={rep}: low acceptance at rungs {low}")
                s_n = empirical_entropy(config.true_model, dataset)
                row = SweepRow(
                    n=n,
                    rep=rep,
                    seed=seed,
                    f_hat=estimate.value,
                    f_stderr=estimate.std_error,
                    s_n=s_n,
                    f_minus_n_sn=estimate.value - n * s_n,
                    method=estimate.method,
                )
                rows.append(row)
                if csv_handle:
                    csv_handle.write(",".join(row.csv_fields()) + "\n")
                    csv_handle.flush()
                if rung_handle and not use_quadrature:
                    for record in estimate.diagnostics["rungs"]:
                        rung_handle.write(
                            ",".join(
                                [
                                    str(n),
                                    str(rep),
                                    str(record["rung"]),
                                    repr(record["beta"]),
                                    repr(record["mean_ll"]),
                                    repr(record["acceptance"]),
                                    repr(record["ess"]),
                                ]
                            )
                            + "\n"
                        )
                    rung_handle.flush()
                if progress is not None:
                    progress(row)
    finally:
        if csv_handle:
            csv_handle.close()
        if rung_handle:
            rung_handle.close()
    return SweepResult(tuple(rows), tuple(rungs), tuple(warnings))


# ---------------------------------------------------------------------------
# Slope fit against the learning-coefficient bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    """OLS fit of mean(F_n - n S_n) against log n, checked against a bound."""

    lambda_hat: float
    intercept: float
    residual_std: float
    slope_stderr: float
    margin: float
    lambda_bound: float
    satisfied: bool
    n_values: tuple[int, ...]
    mean_deviations: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "intercept": self.intercept,
            "residual_std": self.residual_std,
            "slope_stderr": self.slope_stderr,
            "margin": self.margin,
            "lambda_bound": self.lambda_bound,
            "satisfied": self.satisfied,
            "n_values": list(self.n_values),
            "mean_deviations": list(self.mean_deviations),
        }


def fit_lambda(rows, lambda_bound: float) -> SlopeFit:
    """Fit the log n coefficient of the replication-averaged free energy.

    The slope uncertainty combines the regression residual error with the
    per-cell estimator standard errors propagated through the OLS weights;
    the acceptance margin is twice that combined standard error.
    """
    by_n: dict[int, list[SweepRow]] = {}
    for row in rows:
        by_n.setdefault(row.n, []).append(row)
    ns = sorted(by_n)
    if len(ns) < 3:
        raise ValueError("slope fit needs at least 3 distinct sample sizes")
    x = np.log(np.array(ns, dtype=float))
    means = np.array(
        [np.mean([row.f_minus_n_sn for row in by_n[n]]) for n in ns]
    )
    mean_se = np.array(
        [
            math.sqrt(sum(row.f_stderr**2 for row in by_n[n])) / len(by_n[n])
            for n in ns
        ]
    )
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ means / sxx)
    intercept = float(means.mean() - slope * x.mean())
    resid = means - (slope * x + intercept)
    dof = len(ns) - 2
    resid_var = float(resid @ resid) / dof if dof > 0 else 0.0
    slope_var_resid = resid_var / sxx
    weights = xc / sxx
    slope_var_meas = float((weights**2) @ (mean_se**2))
    slope_stderr = math.sqrt(slope_var_resid + slope_var_meas)
    margin = 2.0 * slope_stderr
    return SlopeFit(
        lambda_hat=slope,
        intercept=intercept,
        residual_std=math.sqrt(resid_var),
        slope_stderr=slope_stderr,
        margin=margin,
        lambda_bound=float(lambda_bound),
        satisfied=bool(slope <= float(lambda_bound) + margin),
        n_values=tuple(ns),
        mean_deviations=tuple(float(m) for m in means),
    )


# ---------------------------------------------------------------------------
# Oracle validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleCheck:
    name: str
    ti_value: float
    reference_value: float
    threshold: float

    @property
    def abs_error(self) -> float:
        return abs(self.ti_value - self.reference_value)

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.threshold

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "ti_value": self.ti_value,
            "reference_value": self.reference_value,
            "abs_error": self.abs_error,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class OracleReport:
    n: int
    seed: int
    checks: tuple[OracleCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [check.to_json_dict() for check in self.checks],
        }


ORACLE_MAX_N = 200
CONJUGATE_TOL = 0.2
QUADRATURE_TOL = 0.3
_ORACLE_POINTS = {1: 2001, 2: 301, 3: 101}


def default_oracle_ladder() -> TemperatureLadder:
    """Ladder resolved finely enough for sub-0.1-nat accuracy at small n."""
    return TemperatureLadder.power_schedule(
        rungs=48, settings=McmcSettings(steps=2500, burn_in=800)
    )


def validate_oracle(
    n: int, seed: int = 0, ladder: TemperatureLadder | None = None
) -> OracleReport:
    """Compare TI against the conjugate closed form and the grid quadrature.

    Runs the scalar-mean model against its exact marginal likelihood, and each
    low-dimensional test model against the exhaustive-grid oracle. n = 0 means
    an empty dataset, where every method gives F_0 = 0 exactly.
    """
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle validation is limited to n <= {ORACLE_MAX_N}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        checks = tuple(
            OracleCheck(name, 0.0, 0.0, tol)
            for name, tol in (
                ("conjugate_exact", CONJUGATE_TOL),
                ("quadrature_scalar_mean", QUADRATURE_TOL),
                ("quadrature_two_param_relu", QUADRATURE_TOL),
                ("quadrature_three_param_relu", QUADRATURE_TOL),
            )
        )
        return OracleReport(0, seed, checks)
    if ladder is None:
        ladder = default_oracle_ladder()
    checks: list[OracleCheck] = []
    models = oracle_test_models()

    true_sm, space_sm = models["scalar_mean"]
    prior = Prior()
    dataset = generate_dataset(true_sm, n, _row_seed(seed, n, 0))
    ti = free_energy_ti(
        space_sm, dataset, prior, ladder,
        np.random.default_rng(np.random.SeedSequence([seed, n, 0, 1])),
    )
    exact = conjugate_free_energy_exact(dataset, prior)
    checks.append(OracleCheck("conjugate_exact", ti.value, exact, CONJUGATE_TOL))

    for index, (name, (true_model, space)) in enumerate(models.items(), start=1):
        dataset = generate_dataset(true_model, n, _row_seed(seed, n, index))
        ti = free_energy_ti(
            space, dataset, prior, ladder,
            np.random.default_rng(np.random.SeedSequence([seed, n, index, 1])),
        )
        quad = free_energy_quadrature(
            space, dataset, prior, _ORACLE_POINTS[space.free_dim],
            refinement_check=False,
        )
        checks.append(
            OracleCheck(f"quadrature_{name}", ti.value, quad.value, QUADRATURE_TOL)
        )
    return OracleReport(n, seed, tuple(checks))
