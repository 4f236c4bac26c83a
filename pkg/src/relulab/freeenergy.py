"""Free-energy and generalization-error estimators.

Two routes to F_n = -log Z_n: thermodynamic integration over a temperature
ladder (any dimension), and an exhaustive midpoint-grid quadrature oracle for
models with at most 3 free parameters. On top of these sit the predictive
generalization error, the volume-based upper bound built from the embedding
neighborhood, and the restricted free energy G(U) = -log int_U e^{-nK} phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .bayes import (
    Dataset,
    LOG_2PI,
    ParameterSpace,
    Prior,
    entropy_true,
    log_likelihood_flat,
)
from .embedding import (
    Architecture,
    EssentialSampleConfig,
    TrueModel,
    essential_log_volume,
    sample_essential_params,
)
from .mcmc import TemperatureLadder, run_ensemble
from .network import forward, forward_flat, pack, param_count

QUADRATURE_MAX_DIM = 3
LOW_ACCEPTANCE = 0.05


@dataclass(frozen=True)
class FreeEnergyEstimate:
    value: float
    std_error: float
    method: str  # thermo_integration | quadrature_oracle
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class GenError:
    value: float
    std_error: float

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


def free_energy_ti(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    ladder: TemperatureLadder,
    rng: np.random.Generator,
) -> FreeEnergyEstimate:
    """F_n as minus the trapezoidal integral of per-rung mean log-likelihoods."""
    stats, _ = run_ensemble(
        space,
        dataset,
        prior,
        ladder.betas,
        ladder.settings,
        rng,
        exchange_every=ladder.exchange_every,
    )
    betas = np.asarray(ladder.betas)
    means = np.array([s.mean_ll for s in stats])
    var_means = np.array([s.var_of_mean for s in stats])
    gaps = np.diff(betas)
    weights = np.zeros(len(betas))
    weights[:-1] += 0.5 * gaps
    weights[1:] += 0.5 * gaps
    value = -float(weights @ means)
    std_error = float(np.sqrt((weights**2) @ var_means))
    low = [j for j, s in enumerate(stats) if s.acceptance < LOW_ACCEPTANCE]
    if space.free_dim == 0:
        low = []
    diagnostics = {
        "rungs": [
            {
                "rung": j,
                "beta": s.beta,
                "mean_ll": s.mean_ll,
                "acceptance": s.acceptance,
                "ess": s.ess,
            }
            for j, s in enumerate(stats)
        ],
        "low_acceptance_rungs": low,
    }
    return FreeEnergyEstimate(value, std_error, "thermo_integration", diagnostics)


def _axis_centers(half_width: float, points: int) -> np.ndarray:
    """Midpoints of a uniform partition of [-B, B] into `points` cells."""
    edges = np.linspace(-half_width, half_width, points + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _grid_log_z(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    points: int,
    chunk: int = 16384,
) -> float:
    """log Z_n by midpoint quadrature: logsumexp(loglik) - d log(points)."""
    d = space.free_dim
    if d == 0:
        return float(log_likelihood_flat(space, np.zeros((1, 0)), dataset)[0])
    centers = _axis_centers(prior.half_width, points)
    mesh = np.meshgrid(*[centers] * d, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=-1)
    partials = []
    for start in range(0, len(grid), chunk):
        ll = log_likelihood_flat(space, grid[start : start + chunk], dataset)
        partials.append(logsumexp(ll))
    return float(logsumexp(partials) - d * np.log(points))


def free_energy_quadrature(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    points_per_axis: int = 200,
    refinement_check: bool = True,
) -> FreeEnergyEstimate:
    """Exhaustive-grid F_n for free dimension <= 3; exact up to grid resolution."""
    d = space.free_dim
    if d > QUADRATURE_MAX_DIM:
        raise ValueError(
            f"quadrature oracle limited to {QUADRATURE_MAX_DIM} free parameters, got {d}"
        )
    if points_per_axis < 2 and d > 0:
        raise ValueError("points_per_axis must be at least 2")
    value = -_grid_log_z(space, dataset, prior, points_per_axis)
    diagnostics: dict = {"points_per_axis": points_per_axis}
    if refinement_check and d > 0:
        coarse = -_grid_log_z(space, dataset, prior, max(2, points_per_axis // 2))
        diagnostics["refinement_delta"] = value - coarse
    return FreeEnergyEstimate(value, 0.0, "quadrature_oracle", diagnostics)


@dataclass(frozen=True)
class PosteriorEnsemble:
    """Posterior atoms: free-coordinate vectors with optional log weights."""

    space: ParameterSpace
    thetas: np.ndarray  # (m, free_dim)
    log_weights: np.ndarray | None = None  # normalized; None = equal weights

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        if thetas.ndim != 2:
            raise ValueError("thetas must be (num_atoms, free_dim)")
        if len(thetas) < 1:
            raise ValueError("posterior ensemble is empty")
        object.__setattr__(self, "thetas", thetas)
        if self.log_weights is not None:
            lw = np.asarray(self.log_weights, dtype=float)
            lw = lw - logsumexp(lw)
            object.__setattr__(self, "log_weights", lw)

    @property
    def normalized_log_weights(self) -> np.ndarray:
        if self.log_weights is None:
            m = len(self.thetas)
            return np.full(m, -np.log(m))
        return self.log_weights


def posterior_quadrature(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    points_per_axis: int = 200,
) -> PosteriorEnsemble:
    """Grid posterior (atoms + weights) matching free_energy_quadrature."""
    d = space.free_dim
    if d > QUADRATURE_MAX_DIM:
        raise ValueError(
            f"quadrature oracle limited to {QUADRATURE_MAX_DIM} free parameters, got {d}"
        )
    if d == 0:
        return PosteriorEnsemble(space, np.zeros((1, 0)), None)
    centers = _axis_centers(prior.half_width, points_per_axis)
    mesh = np.meshgrid(*[centers] * d, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=-1)
    ll = np.concatenate(
        [
            log_likelihood_flat(space, grid[s : s + 16384], dataset)
            for s in range(0, len(grid), 16384)
        ]
    )
    return PosteriorEnsemble(space, grid, ll)


def predictive_log_density(
    posterior: PosteriorEnsemble, x: np.ndarray, y: np.ndarray, chunk: int = 8192
) -> np.ndarray:
    """log of the posterior-averaged density p(y|x) at each (x, y) row."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    h_out = y.shape[1]
    log_w = posterior.normalized_log_weights
    pieces = []
    for start in range(0, len(posterior.thetas), chunk):
        thetas = posterior.thetas[start : start + chunk]
        full = posterior.space.embed(thetas)
        out = forward_flat(posterior.space.arch, full, x)  # (m, t, H)
        resid = y[None, :, :] - out
        log_p = -0.5 * h_out * LOG_2PI - 0.5 * np.sum(resid**2, axis=-1)
        pieces.append(log_p + log_w[start : start + chunk, None])
    return logsumexp(np.concatenate(pieces, axis=0), axis=0)


def generalization_error(
    posterior: PosteriorEnsemble,
    true_model: TrueModel,
    num_test: int,
    rng: np.random.Generator,
) -> GenError:
    """Average over fresh (x, y) ~ q of log q(y|x) - log p(y|x, posterior)."""
    if num_test < 2:
        raise ValueError("num_test must be at least 2")
    x = true_model.input_dist.sample(rng, num_test)
    f_true = forward(true_model.arch, true_model.params, x)
    y = f_true + rng.standard_normal(f_true.shape)
    h_out = y.shape[1]
    log_q = -0.5 * h_out * LOG_2PI - 0.5 * np.sum((y - f_true) ** 2, axis=-1)
    log_p = predictive_log_density(posterior, x, y)
    gaps = log_q - log_p
    return GenError(
        value=float(gaps.mean()),
        std_error=float(gaps.std(ddof=1) / np.sqrt(num_test)),
    )


def _batched_kl(
    true_model: TrueModel,
    arch_model: Architecture,
    theta_full: np.ndarray,
    x: np.ndarray,
    chunk: int = 64,
) -> np.ndarray:
    """Mean 0.5||f_model - f_true||^2 over shared inputs, per parameter row."""
    f_true = forward(true_model.arch, true_model.params, x)
    out = np.empty(len(theta_full))
    for start in range(0, len(theta_full), chunk):
        block = forward_flat(arch_model, theta_full[start : start + chunk], x)
        diff = block - f_true
        out[start : start + chunk] = 0.5 * np.mean(np.sum(diff**2, axis=-1), axis=-1)
    return out


def free_energy_upper_bound(
    true_model: TrueModel,
    arch_model: Architecture,
    prior: Prior,
    n: int,
    essential_config: EssentialSampleConfig,
    num_region_samples: int = 200,
    num_kl_inputs: int = 10_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Volume bound on E[F_n]: nS - log[Vol(W_E) mean(exp(-n K) phi)].

    W_E is sampled uniformly; K is estimated on one shared input batch so
    repeated calls with the same generator state are exactly comparable.
    """
    if rng is None:
        raise ValueError("rng is required")
    if n < 1:
        raise ValueError("n must be at least 1")
    prior.validate_for(true_model)
    thetas = np.stack(
        [
            pack(
                arch_model,
                sample_essential_params(true_model, arch_model, essential_config, rng),
            )
            for _ in range(num_region_samples)
        ]
    )
    if not bool((np.abs(thetas) <= prior.half_width).all()):
        raise ValueError(
            "prior box does not cover the sampled region; increase half_width"
        )
    x = true_model.input_dist.sample(rng, num_kl_inputs)
    kl = _batched_kl(true_model, arch_model, thetas, x)
    log_phi = prior.log_density(param_count(arch_model))
    log_mean = float(logsumexp(-n * kl) - np.log(num_region_samples))
    log_vol = essential_log_volume(true_model.arch, arch_model, essential_config)
    return n * entropy_true(true_model) - (log_vol + log_mean + log_phi)


def box_indicator(low: np.ndarray, high: np.ndarray):
    """Indicator of an axis-aligned box over full flat parameter vectors."""
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def indicator(theta: np.ndarray) -> np.ndarray:
        return ((theta >= low) & (theta <= high)).all(axis=-1)

    return indicator


def restricted_free_energy(
    true_model: TrueModel,
    arch_model: Architecture,
    prior: Prior,
    n: int,
    region_indicator,
    proposal_low: np.ndarray,
    proposal_high: np.ndarray,
    num_samples: int = 4000,
    num_inputs: int = 2000,
    rng: np.random.Generator | None = None,
) -> float:
    """G(U) = -log int_U exp(-n K) phi, by uniform proposals over a box.

    Proposals and the KL input batch are drawn in a fixed order, so two calls
    with identical generator seeds share randomness exactly; nested regions
    then satisfy the monotone inequality without MC asymmetry. Returns +inf
    when no proposal lands in the region.
    """
    if rng is None:
        raise ValueError("rng is required")
    if n < 0:
        raise ValueError("n must be nonnegative")
    d = param_count(arch_model)
    low = np.broadcast_to(np.asarray(proposal_low, dtype=float), (d,))
    high = np.broadcast_to(np.asarray(proposal_high, dtype=float), (d,))
    if not (high > low).all():
        raise ValueError("proposal box needs high > low in every coordinate")
    thetas = rng.uniform(low, high, (num_samples, d))
    x = true_model.input_dist.sample(rng, num_inputs)
    mask = np.asarray(region_indicator(thetas), dtype=bool)
    mask &= (np.abs(thetas) <= prior.half_width).all(axis=-1)
    if not mask.any():
        return math.inf
    kl = _batched_kl(true_model, arch_model, thetas[mask], x)
    log_phi = prior.log_density(d)
    log_vol = float(np.sum(np.log(high - low)))
    log_integral = (
        float(logsumexp(-n * kl + log_phi)) - np.log(num_samples) + log_vol
    )
    return -log_integral
