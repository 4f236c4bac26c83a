"""The invariant suite: full pass, adversarial hook, vacuous runs, determinism."""

import numpy as np
import pytest

from relulab.properties import _PROPERTIES, REALIZATION_GRID, run_lemma_suite


def test_suite_passes_and_is_deterministic():
    first = run_lemma_suite(seed=0, trials=300)
    assert len(first) == len(_PROPERTIES)
    for result in first:
        assert result.passed, f"{result.name}: {result.detail}"
        assert not result.warning
    second = run_lemma_suite(seed=0, trials=300)
    assert first == second


def test_adversarial_activation_breaks_contraction_only():
    doubled = lambda t: 2.0 * np.maximum(t, 0.0)
    results = run_lemma_suite(seed=0, trials=2000, activation=doubled)
    failed = {r.name for r in results if not r.passed}
    assert failed == {"contraction_inequality"}


def test_zero_trials_is_vacuous_pass_with_warning():
    results = run_lemma_suite(seed=0, trials=0)
    assert len(results) == len(_PROPERTIES)
    for result in results:
        assert result.passed and result.warning
        assert "vacuous" in result.detail


def test_negative_trials_rejected():
    with pytest.raises(ValueError):
        run_lemma_suite(seed=0, trials=-1)


def test_registry_names_unique():
    names = [name for name, _ in _PROPERTIES]
    assert len(names) == len(set(names))
    assert "contraction_inequality" in names
    assert "realization_exactness" in names


def test_realization_grid_within_size_limits():
    assert len(REALIZATION_GRID) >= 10
    for widths_true, widths_model, _ in REALIZATION_GRID:
        assert max(widths_true) <= 6 and max(widths_model) <= 6
        assert len(widths_true) <= 6 and len(widths_model) <= 6
