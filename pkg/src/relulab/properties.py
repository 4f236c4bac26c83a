"""Property suite: every stated invariant, runnable as one seeded batch.

Each property draws its own instances from a child generator of the suite
seed, so runs are reproducible and properties stay independent of ordering.
A trial count of zero yields a vacuous pass, flagged with a warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .bayes import (
    Prior,
    generate_dataset,
    kl_divergence_mc,
    log_likelihood,
    log_likelihood_flat,
)
from .embedding import (
    EssentialSampleConfig,
    InputDistSpec,
    TrueModel,
    bounded_bias_floor,
    embed_true_network,
    learning_coefficient_bound,
    sample_essential_params,
    signal_block_output,
    silenced_block_output,
    verify_realization,
)
from .experiment import default_oracle_ladder, oracle_test_models
from .freeenergy import (
    box_indicator,
    free_energy_quadrature,
    free_energy_ti,
    posterior_quadrature,
    predictive_log_density,
    restricted_free_energy,
)
from .network import (
    Architecture,
    Parameters,
    contraction_check,
    forward,
    layer_lipschitz_check,
    layer_norm_check,
    layer_output,
    operator_norm,
    param_count,
    relu,
)

_INEQ_SLACK = 1e-9  # absolute+relative guard for float evaluation of real inequalities


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one property: a pass/fail with a human-readable detail."""

    name: str
    passed: bool
    detail: str
    warning: bool = False


# (true widths, model widths, input distribution) pairs used by the
# realization, silencing, and coefficient properties. All pairs satisfy the
# compatibility conditions; depth-2 true networks carry the raw input through
# identity layers, so they get nonnegative input support.
REALIZATION_GRID: tuple[tuple[tuple[int, ...], tuple[int, ...], InputDistSpec], ...] = (
    ((1, 2, 1), (1, 3, 3, 1), InputDistSpec("uniform_box", 1, -1.0, 1.0)),
    ((1, 2, 1), (1, 2, 2, 1), InputDistSpec("gaussian_standard", 1)),
    ((2, 3, 2), (2, 5, 4, 4, 2), InputDistSpec("gaussian_standard", 2)),
    ((1, 2, 1), (1, 2, 1), InputDistSpec("gaussian_standard", 1)),
    ((2, 2, 2, 2), (2, 3, 3, 3, 2), InputDistSpec("gaussian_standard", 2)),
    ((1, 1), (1, 4, 1), InputDistSpec("uniform_nonneg", 1, 0.0, 1.0)),
    ((3, 4, 3), (3, 6, 5, 3), InputDistSpec("gaussian_standard", 3)),
    ((2, 1, 2), (2, 2, 2, 2, 2), InputDistSpec("gaussian_standard", 2)),
    ((1, 3, 2, 1), (1, 4, 4, 3, 1), InputDistSpec("gaussian_standard", 1)),
    ((2, 4, 2), (2, 6, 6, 6, 2), InputDistSpec("uniform_box", 2, -2.0, 2.0)),
    ((1, 2, 1), (1, 6, 6, 6, 6, 1), InputDistSpec("gaussian_standard", 1)),
    ((4, 5, 4), (4, 6, 5, 4), InputDistSpec("gaussian_standard", 4)),
)


def _random_arch(rng: np.random.Generator, output_activation: str | None = None) -> Architecture:
    depth = int(rng.integers(2, 6))
    widths = tuple(int(rng.integers(1, 6)) for _ in range(depth))
    if output_activation is None:
        output_activation = "relu" if rng.random() < 0.5 else "linear"
    return Architecture(widths, output_activation)


def _random_params(rng: np.random.Generator, arch: Architecture, scale: float = 1.5) -> Parameters:
    weights = tuple(
        scale * rng.standard_normal((arch.width(k), arch.width(k - 1)))
        for k in range(2, arch.depth + 1)
    )
    biases = tuple(
        scale * rng.standard_normal(arch.width(k)) for k in range(2, arch.depth + 1)
    )
    return Parameters(weights, biases)


def _grid_true_model(
    index: int, seed: int
) -> tuple[TrueModel, Architecture]:
    widths_true, widths_model, dist = REALIZATION_GRID[index]
    arch_true = Architecture(widths_true)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 100 + index]))
    params_true = _random_params(rng, arch_true, scale=1.0)
    return TrueModel(arch_true, params_true, dist), Architecture(widths_model)


def _holds(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + _INEQ_SLACK * (1.0 + abs(rhs))


# ---------------------------------------------------------------------------
# Forward-pass properties
# ---------------------------------------------------------------------------


def _prop_relu_nonnegativity(rng, trials, activation) -> PropertyResult:
    count = min(trials, 2000)
    for _ in range(count):
        arch = _random_arch(rng)
        params = _random_params(rng, arch)
        x = 2.0 * rng.standard_normal(arch.input_dim)
        for k in range(2, arch.depth):
            if layer_output(arch, params, x, k).values.min(initial=0.0) < 0.0:
                return PropertyResult(
                    "relu_nonnegativity", False, f"negative hidden unit at layer {k}"
                )
        if arch.output_activation == "relu":
            if forward(arch, params, x).min(initial=0.0) < 0.0:
                return PropertyResult(
                    "relu_nonnegativity", False, "negative output under relu activation"
                )
    return PropertyResult("relu_nonnegativity", True, f"{count} random networks")


def _prop_contraction(rng, trials, activation) -> PropertyResult:
    act = relu if activation is None else activation
    failures = 0
    worst = 0.0
    for _ in range(trials):
        dim = int(rng.integers(1, 7))
        s = 3.0 * rng.standard_normal(dim)
        t = 3.0 * rng.standard_normal(dim)
        lhs, rhs = contraction_check(s, t, activation=act)
        if not _holds(lhs, rhs):
            failures += 1
            worst = max(worst, lhs - rhs)
    if failures:
        return PropertyResult(
            "contraction_inequality",
            False,
            f"{failures}/{trials} violations, worst excess {worst:.3e}",
        )
    return PropertyResult("contraction_inequality", True, f"{trials} random pairs")


def _prop_layer_lipschitz(rng, trials, activation) -> PropertyResult:
    for _ in range(trials):
        arch = _random_arch(rng)
        pa = _random_params(rng, arch)
        pb = _random_params(rng, arch)
        x = 2.0 * rng.standard_normal(arch.input_dim)
        k = int(rng.integers(2, arch.depth + 1))
        lhs, rhs = layer_lipschitz_check(arch, pa, pb, x, k)
        if not _holds(lhs, rhs):
            return PropertyResult(
                "layer_lipschitz_inequality",
                False,
                f"violation at k={k}, widths={arch.widths}: {lhs:.6g} > {rhs:.6g}",
            )
    return PropertyResult("layer_lipschitz_inequality", True, f"{trials} random tuples")


def _prop_layer_norm(rng, trials, activation) -> PropertyResult:
    for _ in range(trials):
        arch = _random_arch(rng)
        params = _random_params(rng, arch)
        x = 2.0 * rng.standard_normal(arch.input_dim)
        k = int(rng.integers(2, arch.depth + 1))
        lhs, rhs = layer_norm_check(arch, params, x, k)
        if not _holds(lhs, rhs):
            return PropertyResult(
                "layer_norm_inequality",
                False,
                f"violation at k={k}, widths={arch.widths}: {lhs:.6g} > {rhs:.6g}",
            )
    return PropertyResult("layer_norm_inequality", True, f"{trials} random tuples")


def _prop_forward_determinism(rng, trials, activation) -> PropertyResult:
    count = min(trials, 50)
    for _ in range(count):
        arch = _random_arch(rng)
        params = _random_params(rng, arch)
        x = rng.standard_normal((4, arch.input_dim))
        first = forward(arch, params, x)
        second = forward(arch, params, x)
        if not np.array_equal(first, second):
            return PropertyResult(
                "forward_determinism", False, "repeated forward produced different bits"
            )
    return PropertyResult("forward_determinism", True, f"{count} repeated evaluations")


def _prop_lipschitz_composition(rng, trials, activation) -> PropertyResult:
    count = min(trials, 2000)
    for _ in range(count):
        arch = _random_arch(rng)
        params = _random_params(rng, arch)
        x = 2.0 * rng.standard_normal(arch.input_dim)
        x2 = 2.0 * rng.standard_normal(arch.input_dim)
        lhs = float(np.linalg.norm(forward(arch, params, x) - forward(arch, params, x2)))
        product = 1.0
        for k in range(2, arch.depth + 1):
            product *= operator_norm(params.weight(k))
        rhs = product * float(np.linalg.norm(x - x2))
        if not _holds(lhs, rhs):
            return PropertyResult(
                "lipschitz_composition",
                False,
                f"widths={arch.widths}: {lhs:.6g} > {rhs:.6g}",
            )
    return PropertyResult("lipschitz_composition", True, f"{count} random input pairs")


# ---------------------------------------------------------------------------
# Embedding properties
# ---------------------------------------------------------------------------


def _prop_realization_grid(rng, trials, activation) -> PropertyResult:
    seed = int(rng.integers(0, 2**31))
    num_inputs = min(max(trials, 1), 1000)
    worst = 0.0
    for index in range(len(REALIZATION_GRID)):
        true_model, arch_model = _grid_true_model(index, seed)
        build_rng = np.random.default_rng(np.random.SeedSequence([seed, 200 + index]))
        params = embed_true_network(true_model, arch_model, build_rng)
        dev = verify_realization(true_model, arch_model, params, num_inputs, build_rng)
        worst = max(worst, dev)
        if dev > 1e-9:
            return PropertyResult(
                "realization_exactness",
                False,
                f"pair {true_model.arch.widths}->{arch_model.widths}: deviation {dev:.3e}",
            )
    return PropertyResult(
        "realization_exactness",
        True,
        f"{len(REALIZATION_GRID)} pairs, worst deviation {worst:.3e}",
    )


def _prop_b_block_silencing(rng, trials, activation) -> PropertyResult:
    seed = int(rng.integers(0, 2**31))
    num_inputs = min(max(trials, 1), 300)
    for index in range(len(REALIZATION_GRID)):
        true_model, arch_model = _grid_true_model(index, seed)
        mode = true_model.input_dist.support_mode
        check_rng = np.random.default_rng(np.random.SeedSequence([seed, 300 + index]))
        x = true_model.input_dist.sample(check_rng, num_inputs)

        optimal = embed_true_network(true_model, arch_model, check_rng)
        for k in range(2, arch_model.depth):
            block = silenced_block_output(true_model, arch_model, optimal, x, k)
            if block.size and float(np.abs(block).max()) != 0.0:
                return PropertyResult(
                    "b_block_silencing", False,
                    f"optimal params fired a B-unit at layer {k} (pair {index})",
                )

        n_scale = 10_000
        config = EssentialSampleConfig(
            n=n_scale,
            delta=0.05,
            support_mode=mode,
            bounded_bias_floor=(
                bounded_bias_floor(true_model.input_dist) if mode == "bounded" else 0.0
            ),
        )
        sample = sample_essential_params(true_model, arch_model, config, check_rng)
        start = 2 if mode in ("nonnegative", "bounded") else 3
        for k in range(start, arch_model.depth):
            block = silenced_block_output(true_model, arch_model, sample, x, k)
            if block.size and float(np.abs(block).max()) != 0.0:
                return PropertyResult(
                    "b_block_silencing", False,
                    f"W_E sample fired a B-unit at layer {k} in {mode} mode (pair {index})",
                )
    return PropertyResult(
        "b_block_silencing", True, f"{len(REALIZATION_GRID)} pairs, optimal and sampled"
    )


def _prop_coefficient_half_count(rng, trials, activation) -> PropertyResult:
    for widths_true, _, _ in REALIZATION_GRID:
        arch_true = Architecture(widths_true)
        for mode in ("bounded", "nonnegative"):
            lam = learning_coefficient_bound(arch_true, arch_true, mode)
            expected = Fraction(param_count(arch_true), 2)
            if lam != expected:
                return PropertyResult(
                    "coefficient_half_parameter_count",
                    False,
                    f"{widths_true} {mode}: {lam} != {expected}",
                )
    return PropertyResult(
        "coefficient_half_parameter_count",
        True,
        "half the true parameter count on every grid architecture",
    )


def _prop_coefficient_redundancy(rng, trials, activation) -> PropertyResult:
    for widths_true, widths_model, _ in REALIZATION_GRID:
        arch_true = Architecture(widths_true)
        arch_model = Architecture(widths_model)
        for mode in ("bounded", "nonnegative"):
            wide = learning_coefficient_bound(arch_true, arch_model, mode)
            self_lam = learning_coefficient_bound(arch_true, arch_true, mode)
            if wide != self_lam:
                return PropertyResult(
                    "coefficient_redundancy_invariance",
                    False,
                    f"{widths_true}->{widths_model} {mode}: {wide} != {self_lam}",
                )
        general = learning_coefficient_bound(arch_true, arch_model, "general")
        bounded = learning_coefficient_bound(arch_true, arch_model, "bounded")
        n_star = arch_true.depth
        if n_star >= 3:
            extra = Fraction(arch_true.width(3) * (arch_model.width(2) - arch_true.width(2)), 2)
        else:
            extra = Fraction(0)
        if general - bounded != extra:
            return PropertyResult(
                "coefficient_redundancy_invariance",
                False,
                f"{widths_true}->{widths_model}: general-bounded gap {general - bounded} != {extra}",
            )
    return PropertyResult(
        "coefficient_redundancy_invariance",
        True,
        "widening and deepening shift the coefficient only through the layer-2 term",
    )


def _prop_essential_scaling(rng, trials, activation) -> PropertyResult:
    seed = int(rng.integers(0, 2**31))
    true_model, arch_model = _grid_true_model(0, seed)  # bounded pair
    penultimate = true_model.arch.depth - 1
    draws = min(max(trials // 500, 5), 20)
    num_inputs = 200
    profile = []
    for n in (100, 10_000):
        config = EssentialSampleConfig(
            n=n,
            delta=0.2,
            support_mode="bounded",
            bounded_bias_floor=bounded_bias_floor(true_model.input_dist),
        )
        sample_rng = np.random.default_rng(np.random.SeedSequence([seed, 400, n]))
        worst = 0.0
        for _ in range(draws):
            params = sample_essential_params(true_model, arch_model, config, sample_rng)
            x = true_model.input_dist.sample(sample_rng, num_inputs)
            a_block = signal_block_output(true_model, arch_model, params, x, penultimate)
            f_true = layer_output(true_model.arch, true_model.params, x, penultimate).values
            dev = np.linalg.norm(a_block - f_true, axis=-1) / (
                np.linalg.norm(x, axis=-1) + 1.0
            )
            worst = max(worst, float(dev.max()))
        profile.append(worst * math.sqrt(n))
    ratio = max(profile) / min(profile)
    passed = ratio <= 3.0
    return PropertyResult(
        "essential_scaling_penultimate",
        passed,
        f"sqrt(n)-scaled A-block deviation ratio {ratio:.2f} over n in {{100, 10000}}",
    )


# ---------------------------------------------------------------------------
# Estimator properties
# ---------------------------------------------------------------------------


def _prop_free_energy_decomposition(rng, trials, activation) -> PropertyResult:
    prior = Prior()
    points = 301
    for name, (true_model, space) in list(oracle_test_models().items())[:2]:
        dataset = generate_dataset(true_model, 15, int(rng.integers(0, 2**31)))
        d = space.free_dim
        estimate = free_energy_quadrature(space, dataset, prior, points, refinement_check=False)
        posterior = posterior_quadrature(space, dataset, prior, points)
        ll = np.concatenate(
            [
                log_likelihood_flat(space, posterior.thetas[s : s + 16384], dataset)
                for s in range(0, len(posterior.thetas), 16384)
            ]
        )
        ll_true = log_likelihood(true_model.arch, true_model.params, dataset)
        n_s_n = -ll_true
        rhs = n_s_n - (float(logsumexp(ll - ll_true)) - d * math.log(points))
        if abs(estimate.value - rhs) > 1e-8:
            return PropertyResult(
                "free_energy_decomposition",
                False,
                f"{name}: F={estimate.value:.9f} vs nS_n - log mean exp(-nK_n) = {rhs:.9f}",
            )
    return PropertyResult(
        "free_energy_decomposition", True, "holds on the quadrature grid to 1e-8"
    )


def _prop_predictive_identity(rng, trials, activation) -> PropertyResult:
    true_model, space = oracle_test_models()["two_param_relu"]
    prior = Prior()
    worst = 0.0
    for _ in range(3):
        dataset = generate_dataset(true_model, 11, int(rng.integers(0, 2**31)))
        smaller = dataset.take(10)
        f_small = free_energy_quadrature(space, smaller, prior, 301, refinement_check=False)
        f_full = free_energy_quadrature(space, dataset, prior, 301, refinement_check=False)
        posterior = posterior_quadrature(space, smaller, prior, 301)
        log_pred = float(
            predictive_log_density(posterior, dataset.inputs[10], dataset.outputs[10])[0]
        )
        worst = max(worst, abs(f_full.value - f_small.value + log_pred))
    passed = worst <= 1e-6
    return PropertyResult(
        "predictive_ratio_identity", passed, f"worst |F_(n+1)-F_n + log p| = {worst:.2e}"
    )


def _prop_ti_quadrature_agreement(rng, trials, activation) -> PropertyResult:
    prior = Prior()
    ladder = default_oracle_ladder()
    points = {1: 2001, 2: 301, 3: 101}
    details = []
    for name, (true_model, space) in oracle_test_models().items():
        dataset = generate_dataset(true_model, 30, int(rng.integers(0, 2**31)))
        ti = free_energy_ti(
            space, dataset, prior, ladder,
            np.random.default_rng(np.random.SeedSequence([int(rng.integers(0, 2**31))])),
        )
        quad = free_energy_quadrature(
            space, dataset, prior, points[space.free_dim], refinement_check=False
        )
        gap = abs(ti.value - quad.value)
        details.append(f"{name}={gap:.3f}")
        if gap > 0.3:
            return PropertyResult(
                "ti_quadrature_agreement", False, f"{name}: |TI - quadrature| = {gap:.3f} > 0.3"
            )
    return PropertyResult("ti_quadrature_agreement", True, ", ".join(details))


def _prop_kl_identifiability(rng, trials, activation) -> PropertyResult:
    seed = int(rng.integers(0, 2**31))
    # True net whose output pre-activation is >= 0.3 everywhere, so a +0.5
    # output-bias bump shifts the output by exactly 0.5 on every input.
    arch_true = Architecture((1, 2, 1))
    params_true = Parameters(
        (np.array([[1.5], [-1.0]]), np.array([[1.0, 1.2]])),
        (np.array([0.5, 0.25]), np.array([0.3])),
    )
    true_model = TrueModel(arch_true, params_true, InputDistSpec("gaussian_standard", 1))
    arch_model = Architecture((1, 3, 3, 1))
    check_rng = np.random.default_rng(np.random.SeedSequence([seed, 500]))
    optimal = embed_true_network(true_model, arch_model, check_rng)
    at_optimum = kl_divergence_mc(true_model, arch_model, optimal, 2000, check_rng)
    if at_optimum > 1e-12:
        return PropertyResult(
            "kl_identifiability", False, f"K at realizing parameters = {at_optimum:.3e}"
        )
    perturbed_biases = list(optimal.biases)
    perturbed_biases[-1] = perturbed_biases[-1] + 0.5
    perturbed = Parameters(optimal.weights, tuple(perturbed_biases))
    away = kl_divergence_mc(true_model, arch_model, perturbed, 2000, check_rng)
    if abs(away - 0.125) > 1e-9:
        return PropertyResult(
            "kl_identifiability", False,
            f"K after output-bias bump = {away:.6f}, expected 0.125",
        )
    return PropertyResult(
        "kl_identifiability", True,
        f"K = {at_optimum:.1e} at the optimum, exactly 0.125 after a 0.5 bias bump",
    )


def _prop_restricted_monotonicity(rng, trials, activation) -> PropertyResult:
    true_model, _ = oracle_test_models()["two_param_relu"]
    arch_model = true_model.arch
    prior = Prior()
    pairs = 5
    for _ in range(pairs):
        center = rng.uniform(-1.0, 1.0, param_count(arch_model))
        outer = rng.uniform(1.0, 2.0)
        inner = outer / rng.uniform(1.3, 2.0)
        seed = int(rng.integers(0, 2**31))
        args = dict(num_samples=2000, num_inputs=400)
        g_outer = restricted_free_energy(
            true_model, arch_model, prior, 8,
            box_indicator(center - outer, center + outer),
            center - outer, center + outer,
            rng=np.random.default_rng(seed), **args,
        )
        g_inner = restricted_free_energy(
            true_model, arch_model, prior, 8,
            box_indicator(center - inner, center + inner),
            center - outer, center + outer,
            rng=np.random.default_rng(seed), **args,
        )
        if not g_outer <= g_inner:
            return PropertyResult(
                "restricted_monotonicity",
                False,
                f"G(outer)={g_outer:.6f} > G(inner)={g_inner:.6f}",
            )
    return PropertyResult(
        "restricted_monotonicity", True, f"{pairs} nested pairs with shared randomness"
    )


def _prop_estimator_determinism(rng, trials, activation) -> PropertyResult:
    true_model, space = oracle_test_models()["scalar_mean"]
    prior = Prior()
    dataset = generate_dataset(true_model, 20, int(rng.integers(0, 2**31)))
    ladder = default_oracle_ladder()
    seed = int(rng.integers(0, 2**31))
    first = free_energy_ti(
        space, dataset, prior, ladder, np.random.default_rng(seed)
    )
    second = free_energy_ti(
        space, dataset, prior, ladder, np.random.default_rng(seed)
    )
    if first.value != second.value or first.std_error != second.std_error:
        return PropertyResult(
            "estimator_determinism", False, "TI reruns differ despite identical seeds"
        )
    quad_a = free_energy_quadrature(space, dataset, prior, 501)
    quad_b = free_energy_quadrature(space, dataset, prior, 501)
    if quad_a.value != quad_b.value:
        return PropertyResult(
            "estimator_determinism", False, "quadrature reruns differ"
        )
    return PropertyResult(
        "estimator_determinism", True, "TI and quadrature reruns bitwise identical"
    )


_PROPERTIES = (
    ("relu_nonnegativity", _prop_relu_nonnegativity),
    ("contraction_inequality", _prop_contraction),
    ("layer_lipschitz_inequality", _prop_layer_lipschitz),
    ("layer_norm_inequality", _prop_layer_norm),
    ("forward_determinism", _prop_forward_determinism),
    ("lipschitz_composition", _prop_lipschitz_composition),
    ("realization_exactness", _prop_realization_grid),
    ("b_block_silencing", _prop_b_block_silencing),
    ("coefficient_half_parameter_count", _prop_coefficient_half_count),
    ("coefficient_redundancy_invariance", _prop_coefficient_redundancy),
    ("essential_scaling_penultimate", _prop_essential_scaling),
    ("free_energy_decomposition", _prop_free_energy_decomposition),
    ("predictive_ratio_identity", _prop_predictive_identity),
    ("ti_quadrature_agreement", _prop_ti_quadrature_agreement),
    ("kl_identifiability", _prop_kl_identifiability),
    ("restricted_monotonicity", _prop_restricted_monotonicity),
    ("estimator_determinism", _prop_estimator_determinism),
)


def run_lemma_suite(
    seed: int = 0, trials: int = 10_000, activation=None
) -> list[PropertyResult]:
    """Run every stated invariant; `activation` swaps the nonlinearity used by
    the contraction check (a deliberately broken activation must fail it)."""
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    if trials == 0:
        return [
            PropertyResult(name, True, "vacuous pass: trial count 0", warning=True)
            for name, _ in _PROPERTIES
        ]
    results = []
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(_PROPERTIES))
    for (_, prop), child in zip(_PROPERTIES, children):
        results.append(prop(np.random.default_rng(child), trials, activation))
    return results
