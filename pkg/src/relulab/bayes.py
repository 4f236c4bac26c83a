"""Datasets, Gaussian likelihood, uniform-box prior, entropies, KL estimation.

The observation model is y = f(x) + standard Gaussian noise with identity
covariance, so log densities and entropies have closed forms in the network
output. Parameter vectors are handled flat (see network.flat_slices); a
ParameterSpace marks which coordinates are free and which stay pinned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    Architecture,
    Parameters,
    ShapeError,
    forward,
    forward_flat,
    pack,
    param_count,
    unpack,
)
from .embedding import TrueModel

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Dataset:
    """Immutable (X, Y) sample with the seed that generated it."""

    inputs: np.ndarray
    outputs: np.ndarray
    seed: int

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if x.ndim != 2 or y.ndim != 2:
            raise ShapeError("inputs and outputs must be 2-d arrays")
        if len(x) != len(y):
            raise ShapeError(f"{len(x)} inputs but {len(y)} outputs")
        if len(x) < 1:
            raise ValueError("dataset needs at least one row")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return len(self.inputs)

    def take(self, n: int) -> "Dataset":
        """Prefix of the first n rows (shares the seed)."""
        return Dataset(self.inputs[:n], self.outputs[:n], self.seed)


def generate_dataset(
    true_model: TrueModel, n: int, seed: int, noise_scale: float = 1.0
) -> Dataset:
    """Draw X ~ q(x) and Y = f*(X) + noise; noise_scale=0 is the noiseless hook."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    x = true_model.input_dist.sample(rng, n)
    y = forward(true_model.arch, true_model.params, x)
    if noise_scale != 0.0:
        y = y + noise_scale * rng.standard_normal(y.shape)
    return Dataset(x, y, seed)


@dataclass(frozen=True)
class ParameterSpace:
    """Architecture plus a flat base vector and the mask of free coordinates.

    Sampling and quadrature explore only the free coordinates; pinned ones
    keep their base value. The prior applies to free coordinates only.
    """

    arch: Architecture
    base: np.ndarray
    free_mask: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        mask = np.asarray(self.free_mask, dtype=bool)
        d = param_count(self.arch)
        if base.shape != (d,):
            raise ShapeError(f"base vector has shape {base.shape}, expected ({d},)")
        if mask.shape != (d,):
            raise ShapeError(f"free mask has shape {mask.shape}, expected ({d},)")
        base.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "free_mask", mask)

    @property
    def free_dim(self) -> int:
        return int(self.free_mask.sum())

    @classmethod
    def full(cls, arch: Architecture) -> "ParameterSpace":
        d = param_count(arch)
        return cls(arch, np.zeros(d), np.ones(d, dtype=bool))

    @classmethod
    def pinned(
        cls, arch: Architecture, params: Parameters, free_indices=()
    ) -> "ParameterSpace":
        """All coordinates pinned to params except the listed flat indices."""
        base = pack(arch, params)
        mask = np.zeros(len(base), dtype=bool)
        mask[list(free_indices)] = True
        return cls(arch, base, mask)

    def embed(self, theta_free: np.ndarray) -> np.ndarray:
        """Scatter free coordinates into full flat vectors (batched)."""
        theta_free = np.asarray(theta_free, dtype=float)
        out = np.broadcast_to(self.base, theta_free.shape[:-1] + self.base.shape).copy()
        out[..., self.free_mask] = theta_free
        return out

    def params_at(self, theta_free: np.ndarray) -> Parameters:
        return unpack(self.arch, self.embed(theta_free))


@dataclass(frozen=True)
class Prior:
    """Uniform box on the free coordinates, half-width B per coordinate."""

    half_width: float = 5.0

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    def validate_for(self, true_model: TrueModel) -> None:
        """Box must extend past every true parameter by the constant-range width."""
        peak = max(
            float(np.abs(w).max()) for w in true_model.params.weights
        )
        peak = max(
            peak, max(float(np.abs(b).max()) for b in true_model.params.biases)
        )
        if self.half_width <= peak + 2.0:
            raise ValueError(
                f"prior half_width {self.half_width} must exceed "
                f"max |true param| + 2 = {peak + 2.0}"
            )

    def contains(self, theta_free: np.ndarray) -> np.ndarray:
        """Boolean per batch row: all free coordinates inside the box."""
        theta_free = np.asarray(theta_free, dtype=float)
        return (np.abs(theta_free) <= self.half_width).all(axis=-1)

    def log_density(self, free_dim: int) -> float:
        """Log density inside the box (constant); -d log(2B)."""
        return -free_dim * float(np.log(2.0 * self.half_width))


def log_likelihood(arch: Architecture, params: Parameters, dataset: Dataset) -> float:
    """Sum over rows of log p(Y_i | X_i, params)."""
    params.validate_for(arch)
    if dataset.inputs.shape[1] != arch.input_dim:
        raise ShapeError(
            f"layer 1: dataset inputs have {dataset.inputs.shape[1]} features, "
            f"expected {arch.input_dim}"
        )
    if dataset.outputs.shape[1] != arch.output_dim:
        raise ShapeError(
            f"layer {arch.depth}: dataset outputs have {dataset.outputs.shape[1]} "
            f"features, expected {arch.output_dim}"
        )
    resid = dataset.outputs - forward(arch, params, dataset.inputs)
    n, h_out = dataset.outputs.shape
    return float(-0.5 * n * h_out * LOG_2PI - 0.5 * np.sum(resid**2))


def log_likelihood_flat(
    space: ParameterSpace, theta_free: np.ndarray, dataset: Dataset
) -> np.ndarray:
    """Batched log likelihood over free-coordinate vectors (..., d_free)."""
    theta = space.embed(theta_free)
    out = forward_flat(space.arch, theta, dataset.inputs)
    resid = dataset.outputs - out
    n, h_out = dataset.outputs.shape
    return -0.5 * n * h_out * LOG_2PI - 0.5 * np.sum(resid**2, axis=(-2, -1))


def entropy_true(true_model: TrueModel) -> float:
    """Conditional entropy S of the true model: (H_N/2)(1 + log 2 pi)."""
    return 0.5 * true_model.arch.output_dim * (1.0 + LOG_2PI)


def empirical_entropy(true_model: TrueModel, dataset: Dataset) -> float:
    """S_n = -(1/n) sum_i log q(Y_i | X_i)."""
    return -log_likelihood(true_model.arch, true_model.params, dataset) / dataset.n


def kl_on_inputs(
    true_model: TrueModel, arch_model: Architecture, params: Parameters, x: np.ndarray
) -> float:
    """Mean of 0.5 ||f_model(x) - f_true(x)||^2 over given inputs."""
    diff = forward(arch_model, params, x) - forward(
        true_model.arch, true_model.params, x
    )
    return float(0.5 * np.mean(np.sum(diff**2, axis=-1)))


def kl_divergence_mc(
    true_model: TrueModel,
    arch_model: Architecture,
    params: Parameters,
    num_inputs: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo KL from the truth to the model at fixed parameters."""
    if num_inputs < 1:
        raise ValueError("num_inputs must be at least 1")
    x = true_model.input_dist.sample(rng, num_inputs)
    return kl_on_inputs(true_model, arch_model, params, x)
