"""Free-energy estimators, posterior predictives, and region-restricted bounds."""

import math

import numpy as np
import pytest

from relulab.bayes import ParameterSpace, Prior, generate_dataset, log_likelihood
from relulab.embedding import EssentialSampleConfig, bounded_bias_floor
from relulab.experiment import (
    conjugate_free_energy_exact,
    scalar_mean_model,
    two_param_relu_model,
)
from relulab.freeenergy import (
    FreeEnergyEstimate,
    box_indicator,
    free_energy_quadrature,
    free_energy_ti,
    free_energy_upper_bound,
    generalization_error,
    posterior_quadrature,
    predictive_log_density,
    restricted_free_energy,
)
from relulab.mcmc import McmcSettings, TemperatureLadder
from relulab.network import Architecture, Parameters, param_count
from relulab.embedding import InputDistSpec, TrueModel


def _bounded_true_121():
    arch = Architecture((1, 2, 1), "relu")
    params = Parameters(
        (np.array([[1.5], [-1.0]]), np.array([[1.0, 1.2]])),
        (np.array([0.5, 0.25]), np.array([0.3])),
    )
    return TrueModel(arch, params, InputDistSpec("uniform_box", 1, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------


def test_quadrature_matches_conjugate_closed_form():
    tm, space = scalar_mean_model()
    prior = Prior(5.0)
    ds = generate_dataset(tm, 40, seed=1)
    est = free_energy_quadrature(space, ds, prior, points_per_axis=2001)
    exact = conjugate_free_energy_exact(ds, prior)
    assert est.method == "quadrature_oracle"
    assert est.std_error == 0.0
    assert est.value == pytest.approx(exact, abs=1e-3)
    assert abs(est.diagnostics["refinement_delta"]) < 1e-3


def test_quadrature_zero_free_dim_is_exact():
    tm, _ = scalar_mean_model()
    space = ParameterSpace.pinned(tm.arch, tm.params, [])
    ds = generate_dataset(tm, 25, seed=2)
    est = free_energy_quadrature(space, ds, Prior(5.0))
    assert est.value == -log_likelihood(tm.arch, tm.params, ds)


def test_quadrature_dimension_limit():
    arch = Architecture((1, 2, 1))
    space = ParameterSpace.full(arch)  # 7 free parameters
    tm = _bounded_true_121()
    ds = generate_dataset(tm, 5, seed=0)
    with pytest.raises(ValueError, match="limited to 3"):
        free_energy_quadrature(space, ds, Prior(5.0))
    with pytest.raises(ValueError, match="limited to 3"):
        posterior_quadrature(space, ds, Prior(5.0))


def test_quadrature_rejects_degenerate_grid():
    tm, space = scalar_mean_model()
    ds = generate_dataset(tm, 5, seed=0)
    with pytest.raises(ValueError):
        free_energy_quadrature(space, ds, Prior(5.0), points_per_axis=1)


def test_estimate_validation():
    with pytest.raises(ValueError):
        FreeEnergyEstimate(1.0, -0.1, "thermo_integration")


# ---------------------------------------------------------------------------
# Thermodynamic integration
# ---------------------------------------------------------------------------


def test_ti_matches_conjugate():
    tm, space = scalar_mean_model()
    prior = Prior(5.0)
    ds = generate_dataset(tm, 50, seed=3)
    ladder = TemperatureLadder.power_schedule(
        rungs=24, settings=McmcSettings(steps=1000, burn_in=400)
    )
    est = free_energy_ti(space, ds, prior, ladder, np.random.default_rng(4))
    exact = conjugate_free_energy_exact(ds, prior)
    assert est.method == "thermo_integration"
    assert est.std_error > 0.0
    assert abs(est.value - exact) <= 0.2
    assert len(est.diagnostics["rungs"]) == 25
    assert est.diagnostics["low_acceptance_rungs"] == []


def test_ti_coarse_ladder_fails():
    # two rungs cannot resolve the integrand: the error must exceed the oracle gate
    tm, space = scalar_mean_model()
    prior = Prior(5.0)
    ds = generate_dataset(tm, 50, seed=5)
    ladder = TemperatureLadder(
        (0.0, 1.0),
        McmcSettings(steps=600, burn_in=200),
        enforce_min_rungs=False,
    )
    est = free_energy_ti(space, ds, prior, ladder, np.random.default_rng(6))
    exact = conjugate_free_energy_exact(ds, prior)
    assert abs(est.value - exact) > 0.2


# ---------------------------------------------------------------------------
# Posterior, predictive, generalization error
# ---------------------------------------------------------------------------


def test_predictive_matches_free_energy_increment():
    tm, space = two_param_relu_model()
    prior = Prior(5.0)
    full = generate_dataset(tm, 11, seed=7)
    head = full.take(10)
    f_head = free_energy_quadrature(space, head, prior, 301, refinement_check=False)
    f_full = free_energy_quadrature(space, full, prior, 301, refinement_check=False)
    posterior = posterior_quadrature(space, head, prior, 301)
    log_p = predictive_log_density(
        posterior, full.inputs[10:11], full.outputs[10:11]
    )
    assert f_full.value - f_head.value == pytest.approx(-float(log_p[0]), abs=1e-6)


def test_pinned_posterior_has_zero_generalization_error():
    tm, _ = scalar_mean_model()
    space = ParameterSpace.pinned(tm.arch, tm.params, [])
    ds = generate_dataset(tm, 10, seed=8)
    posterior = posterior_quadrature(space, ds, Prior(5.0))
    gen = generalization_error(posterior, tm, 500, np.random.default_rng(9))
    assert gen.value == 0.0 and gen.std_error == 0.0


def test_generalization_error_positive_for_spread_posterior():
    tm, space = scalar_mean_model()
    ds = generate_dataset(tm, 10, seed=10)
    posterior = posterior_quadrature(space, ds, Prior(5.0), 801)
    gen = generalization_error(posterior, tm, 4000, np.random.default_rng(11))
    # posterior variance ~1/n leaves an O(1/2n) expected information gap
    assert 0.0 < gen.value < 0.5
    assert gen.std_error > 0.0
    with pytest.raises(ValueError):
        generalization_error(posterior, tm, 1, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# Volume bound on the expected free energy
# ---------------------------------------------------------------------------


def test_upper_bound_finite_and_validated():
    tm = _bounded_true_121()
    arch_model = Architecture((1, 3, 3, 1), "relu")
    config = EssentialSampleConfig(
        10_000, 0.2, "bounded", bounded_bias_floor(tm.input_dist)
    )
    bound = free_energy_upper_bound(
        tm, arch_model, Prior(5.0), 100, config, rng=np.random.default_rng(12)
    )
    assert math.isfinite(bound) and bound > 0.0
    with pytest.raises(ValueError, match="n must be"):
        free_energy_upper_bound(
            tm, arch_model, Prior(5.0), 0, config, rng=np.random.default_rng(0)
        )
    with pytest.raises(ValueError, match="rng"):
        free_energy_upper_bound(tm, arch_model, Prior(5.0), 100, config)


def test_upper_bound_requires_prior_coverage():
    tm = _bounded_true_121()
    arch_model = Architecture((1, 3, 3, 1), "relu")
    # floor-window biases reach magnitude 4, outside a 3.9-half-width box
    config = EssentialSampleConfig(
        10_000, 0.2, "bounded", bounded_bias_floor(tm.input_dist)
    )
    with pytest.raises(ValueError, match="does not cover"):
        free_energy_upper_bound(
            tm, arch_model, Prior(3.9), 100, config, rng=np.random.default_rng(13)
        )


# ---------------------------------------------------------------------------
# Restricted free energy over parameter regions
# ---------------------------------------------------------------------------


def test_box_indicator():
    ind = box_indicator(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
    theta = np.array([[0.5, 0.0], [1.5, 0.0], [0.5, -2.0]])
    assert ind(theta).tolist() == [True, False, False]


def test_restricted_full_box_no_data_is_zero():
    tm, _ = two_param_relu_model()
    prior = Prior(5.0)
    d = param_count(tm.arch)
    low, high = np.full(d, -5.0), np.full(d, 5.0)
    value = restricted_free_energy(
        tm, tm.arch, prior, 0, box_indicator(low, high), low, high,
        num_samples=500, num_inputs=50, rng=np.random.default_rng(14),
    )
    assert value == pytest.approx(0.0, abs=1e-12)


def test_restricted_empty_region_is_infinite():
    tm, _ = two_param_relu_model()
    d = param_count(tm.arch)
    low, high = np.full(d, -5.0), np.full(d, 5.0)
    value = restricted_free_energy(
        tm, tm.arch, Prior(5.0), 3, lambda t: np.zeros(len(t), dtype=bool),
        low, high, num_samples=200, num_inputs=50, rng=np.random.default_rng(15),
    )
    assert value == math.inf


def test_restricted_monotone_under_nesting():
    tm, _ = two_param_relu_model()
    prior = Prior(5.0)
    d = param_count(tm.arch)
    outer_low, outer_high = np.full(d, -2.0), np.full(d, 2.0)
    inner_low, inner_high = np.full(d, -1.0), np.full(d, 1.0)

    def value(indicator):
        # shared seed + shared proposal box = shared randomness for both regions
        return restricted_free_energy(
            tm, tm.arch, prior, 5, indicator, outer_low, outer_high,
            num_samples=2000, num_inputs=200, rng=np.random.default_rng(16),
        )

    g_outer = value(box_indicator(outer_low, outer_high))
    g_inner = value(box_indicator(inner_low, inner_high))
    assert g_inner >= g_outer


def test_restricted_validation():
    tm, _ = two_param_relu_model()
    d = param_count(tm.arch)
    low, high = np.full(d, -1.0), np.full(d, 1.0)
    ind = box_indicator(low, high)
    with pytest.raises(ValueError):
        restricted_free_energy(
            tm, tm.arch, Prior(5.0), -1, ind, low, high,
            rng=np.random.default_rng(0),
        )
    with pytest.raises(ValueError):
        restricted_free_energy(
            tm, tm.arch, Prior(5.0), 1, ind, high, low,
            rng=np.random.default_rng(0),
        )
    with pytest.raises(ValueError, match="rng"):
        restricted_free_energy(tm, tm.arch, Prior(5.0), 1, ind, low, high)
