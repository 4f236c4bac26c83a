"""Numerical laboratory for Bayesian free energy of overparametrized ReLU nets.

Layers: exact forward evaluation and inequality checks (`network`), optimal
embeddings and the essential parameter neighborhood (`embedding`), likelihoods
and parameter spaces (`bayes`), tempered-ensemble MCMC (`mcmc`), free-energy
estimators and bounds (`freeenergy`), experiment sweeps (`experiment`), the
property suite (`properties`), and file reporting (`reporting`).
"""

from .network import (
    Architecture,
    LayerOutput,
    Parameters,
    ShapeError,
    contraction_check,
    forward,
    forward_flat,
    layer_lipschitz_check,
    layer_norm_check,
    layer_output,
    operator_norm,
    pack,
    param_count,
    relu,
    unpack,
)
from .embedding import (
    CompatibilityReport,
    CoordinateCounts,
    EssentialSampleConfig,
    InputDistSpec,
    ProfilePoint,
    TrueModel,
    bounded_bias_floor,
    check_compatibility,
    embed_true_network,
    essential_coordinate_counts,
    essential_error_profile,
    essential_log_volume,
    learning_coefficient_bound,
    require_compatible,
    sample_essential_params,
    signal_block_output,
    silenced_block_output,
    verify_realization,
)
from .bayes import (
    Dataset,
    ParameterSpace,
    Prior,
    empirical_entropy,
    entropy_true,
    generate_dataset,
    kl_divergence_mc,
    kl_on_inputs,
    log_likelihood,
    log_likelihood_flat,
)
from .mcmc import (
    ChainResult,
    McmcSettings,
    RungStats,
    TemperatureLadder,
    mcmc_chain,
    run_ensemble,
)
from .freeenergy import (
    FreeEnergyEstimate,
    GenError,
    PosteriorEnsemble,
    box_indicator,
    free_energy_quadrature,
    free_energy_ti,
    free_energy_upper_bound,
    generalization_error,
    posterior_quadrature,
    predictive_log_density,
    restricted_free_energy,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    OracleCheck,
    OracleReport,
    SlopeFit,
    SweepResult,
    SweepRow,
    conjugate_free_energy_exact,
    default_oracle_ladder,
    fit_lambda,
    oracle_test_models,
    run_sweep,
    validate_oracle,
)
from .properties import PropertyResult, run_lemma_suite

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "LayerOutput",
    "Parameters",
    "ShapeError",
    "contraction_check",
    "forward",
    "forward_flat",
    "layer_lipschitz_check",
    "layer_norm_check",
    "layer_output",
    "operator_norm",
    "pack",
    "param_count",
    "relu",
    "unpack",
    "CompatibilityReport",
    "CoordinateCounts",
    "EssentialSampleConfig",
    "InputDistSpec",
    "ProfilePoint",
    "TrueModel",
    "bounded_bias_floor",
    "check_compatibility",
    "embed_true_network",
    "essential_coordinate_counts",
    "essential_error_profile",
    "essential_log_volume",
    "learning_coefficient_bound",
    "require_compatible",
    "sample_essential_params",
    "signal_block_output",
    "silenced_block_output",
    "verify_realization",
    "Dataset",
    "ParameterSpace",
    "Prior",
    "empirical_entropy",
    "entropy_true",
    "generate_dataset",
    "kl_divergence_mc",
    "kl_on_inputs",
    "log_likelihood",
    "log_likelihood_flat",
    "ChainResult",
    "McmcSettings",
    "RungStats",
    "TemperatureLadder",
    "mcmc_chain",
    "run_ensemble",
    "FreeEnergyEstimate",
    "GenError",
    "PosteriorEnsemble",
    "box_indicator",
    "free_energy_quadrature",
    "free_energy_ti",
    "free_energy_upper_bound",
    "generalization_error",
    "posterior_quadrature",
    "predictive_log_density",
    "restricted_free_energy",
    "ConfigError",
    "ExperimentConfig",
    "OracleCheck",
    "OracleReport",
    "SlopeFit",
    "SweepResult",
    "SweepRow",
    "conjugate_free_energy_exact",
    "default_oracle_ladder",
    "fit_lambda",
    "oracle_test_models",
    "run_sweep",
    "validate_oracle",
    "PropertyResult",
    "run_lemma_suite",
    "__version__",
]
