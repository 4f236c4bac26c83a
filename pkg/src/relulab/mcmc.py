"""Random-walk Metropolis over free parameter coordinates, one rung per beta.

All rungs of a temperature ladder advance together: chain states live in a
(rungs, dim) array and every proposal evaluates the likelihood for all rungs
in one batched call. Proposals are component-wise Gaussian; scales adapt
toward 0.234 acceptance during burn-in only and stay frozen afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bayes import Dataset, ParameterSpace, Prior, log_likelihood_flat

TARGET_ACCEPT = 0.234


@dataclass(frozen=True)
class McmcSettings:
    """Chain-length and proposal knobs shared by all rungs."""

    steps: int = 1500  # kept post-burn-in sweeps (after thinning)
    burn_in: int = 500
    initial_scale: float = 0.5
    thin: int = 1
    adapt_interval: int = 25

    def __post_init__(self):
        if self.steps < 1 or self.burn_in < 0:
            raise ValueError("steps must be >= 1 and burn_in >= 0")
        if self.thin < 1 or self.adapt_interval < 1:
            raise ValueError("thin and adapt_interval must be >= 1")
        if self.initial_scale <= 0:
            raise ValueError("initial_scale must be positive")


@dataclass(frozen=True)
class TemperatureLadder:
    """Ascending inverse temperatures from 0 to 1 with shared MCMC settings."""

    betas: tuple[float, ...]
    settings: McmcSettings = field(default_factory=McmcSettings)
    exchange_every: int | None = None
    enforce_min_rungs: bool = True

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if len(betas) < 2:
            raise ValueError("ladder needs at least 2 rungs")
        if self.enforce_min_rungs and len(betas) < 8:
            raise ValueError(
                "ladder needs at least 8 rungs (pass enforce_min_rungs=False "
                "only for deliberate sensitivity demonstrations)"
            )
        if betas[0] != 0.0 or betas[-1] != 1.0:
            raise ValueError("ladder must start at beta=0 and end at beta=1")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly ascending")
        if self.exchange_every is not None and self.exchange_every < 1:
            raise ValueError("exchange_every must be >= 1 when set")

    @classmethod
    def power_schedule(
        cls,
        rungs: int = 32,
        power: float = 5.0,
        settings: McmcSettings | None = None,
        exchange_every: int | None = None,
        enforce_min_rungs: bool = True,
    ) -> "TemperatureLadder":
        """beta_j = (j/J)^power for j = 0..J; dense near beta = 0."""
        betas = tuple((j / rungs) ** power for j in range(rungs + 1))
        return cls(
            betas,
            settings or McmcSettings(),
            exchange_every,
            enforce_min_rungs,
        )


@dataclass(frozen=True)
class RungStats:
    """Summary of one rung's post-burn-in log-likelihood trace."""

    beta: float
    mean_ll: float
    var_of_mean: float  # batch-means variance of mean_ll
    acceptance: float
    ess: float


@dataclass(frozen=True)
class ChainResult:
    """Posterior samples from a single rung."""

    beta: float
    samples: np.ndarray  # (steps, free_dim)
    log_liks: np.ndarray  # (steps,)
    acceptance: float
    ess: float


def _batch_means_var(trace: np.ndarray) -> float:
    """Variance of the trace mean, estimated from batch means."""
    m = len(trace)
    nb = max(5, min(50, int(np.sqrt(m))))
    size = m // nb
    if size < 1:
        return float(np.var(trace, ddof=1) / max(m, 1)) if m > 1 else 0.0
    batches = trace[: nb * size].reshape(nb, size).mean(axis=1)
    return float(np.var(batches, ddof=1) / nb)


def run_ensemble(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    betas: tuple[float, ...],
    settings: McmcSettings,
    rng: np.random.Generator,
    exchange_every: int | None = None,
    keep_samples: tuple[int, ...] = (),
) -> tuple[list[RungStats], dict[int, np.ndarray]]:
    """Advance one chain per beta; returns per-rung stats and kept samples."""
    betas_arr = np.asarray(betas, dtype=float)
    n_rungs = len(betas_arr)
    d = space.free_dim
    bound = prior.half_width

    theta = rng.uniform(-bound, bound, (n_rungs, d))
    ll = log_likelihood_flat(space, theta, dataset)
    if not np.all(np.isfinite(ll)):
        raise RuntimeError("non-finite log-likelihood at initialization")

    total = settings.burn_in + settings.steps * settings.thin
    trace = np.empty((n_rungs, settings.steps))
    kept: dict[int, list[np.ndarray]] = {j: [] for j in keep_samples}

    if d == 0:
        trace[:] = ll[:, None]
        stats = [
            RungStats(float(b), float(v), 0.0, 1.0, float(settings.steps))
            for b, v in zip(betas_arr, ll)
        ]
        samples = {
            j: np.zeros((settings.steps, 0)) for j in keep_samples
        }
        return stats, samples

    scales = np.full((n_rungs, d), settings.initial_scale)
    win_accept = np.zeros((n_rungs, d))
    post_accept = np.zeros(n_rungs)
    post_proposed = 0
    kept_idx = 0

    for sweep in range(total):
        adapting = sweep < settings.burn_in
        for c in range(d):
            step = scales[:, c] * rng.standard_normal(n_rungs)
            prop_c = theta[:, c] + step
            inside = np.abs(prop_c) <= bound
            prop = theta.copy()
            prop[:, c] = prop_c
            ll_prop = log_likelihood_flat(space, prop, dataset)
            log_alpha = betas_arr * (ll_prop - ll)
            accept = inside & (np.log(rng.uniform(size=n_rungs)) < log_alpha)
            theta[accept, c] = prop_c[accept]
            ll[accept] = ll_prop[accept]
            if adapting:
                win_accept[:, c] += accept
            else:
                post_accept += accept
        if not adapting:
            post_proposed += d
        if adapting and (sweep + 1) % settings.adapt_interval == 0:
            rate = win_accept / settings.adapt_interval
            scales *= np.exp(rate - TARGET_ACCEPT)
            np.clip(scales, 1e-8 * bound, 4.0 * bound, out=scales)
            win_accept[:] = 0.0
        if exchange_every is not None and (sweep + 1) % exchange_every == 0:
            start = ((sweep + 1) // exchange_every) % 2
            pairs = np.arange(start, n_rungs - 1, 2)
            if len(pairs):
                delta = (betas_arr[pairs + 1] - betas_arr[pairs]) * (
                    ll[pairs] - ll[pairs + 1]
                )
                swap = np.log(rng.uniform(size=len(pairs))) < delta
                for j in pairs[swap]:
                    theta[[j, j + 1]] = theta[[j + 1, j]]
                    ll[[j, j + 1]] = ll[[j + 1, j]]
        if sweep >= settings.burn_in and (sweep - settings.burn_in) % settings.thin == 0:
            trace[:, kept_idx] = ll
            for j in kept:
                kept[j].append(theta[j].copy())
            kept_idx += 1

    stats = []
    for j in range(n_rungs):
        t = trace[j]
        var_mean = _batch_means_var(t)
        sample_var = float(np.var(t, ddof=1)) if len(t) > 1 else 0.0
        ess = sample_var / var_mean if var_mean > 0 else float(len(t))
        acc = float(post_accept[j] / post_proposed) if post_proposed else 1.0
        stats.append(
            RungStats(
                beta=float(betas_arr[j]),
                mean_ll=float(t.mean()),
                var_of_mean=var_mean,
                acceptance=acc,
                ess=float(min(ess, len(t))),
            )
        )
    samples = {j: np.array(v) for j, v in kept.items()}
    return stats, samples


def mcmc_chain(
    space: ParameterSpace,
    dataset: Dataset,
    prior: Prior,
    beta: float,
    settings: McmcSettings,
    rng: np.random.Generator,
) -> ChainResult:
    """Single-rung chain targeting density proportional to prior * likelihood^beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    stats, samples = run_ensemble(
        space, dataset, prior, (float(beta),), settings, rng, keep_samples=(0,)
    )
    ll_trace = log_likelihood_flat(space, samples[0], dataset)
    return ChainResult(
        beta=float(beta),
        samples=samples[0],
        log_liks=np.asarray(ll_trace, dtype=float),
        acceptance=stats[0].acceptance,
        ess=stats[0].ess,
    )
