"""Embedding a small ReLU network into a wider/deeper one.

A compatible model architecture can reproduce the true network exactly: the
extra ("B") units of each layer are silenced by negative biases and the extra
layers carry the signal forward through identity blocks. Around that exact
embedding sits a structured neighborhood whose coordinates are either
"convergent" (interval width 2/sqrt(n)), "slack" (width delta) or "constant"
(width 1); its volume drives the free-energy upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Architecture, Parameters, ShapeError, forward, layer_output

SUPPORT_MODES = ("general", "nonnegative", "bounded")

_MAX_RESAMPLE = 8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class InputDistSpec:
    """Input distribution q(x): standard Gaussian or a uniform box."""

    kind: str  # gaussian_standard | uniform_box | uniform_nonneg
    dim: int
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian_standard", "uniform_box", "uniform_nonneg"):
            raise ValueError(f"unknown input distribution kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("input dimension must be positive")
        if self.kind != "gaussian_standard":
            if not (np.isfinite(self.low) and np.isfinite(self.high)):
                raise ValueError("uniform bounds must be finite")
            if not self.low < self.high:
                raise ValueError("uniform bounds need low < high")
            if self.kind == "uniform_nonneg" and self.low < 0:
                raise ValueError("uniform_nonneg needs low >= 0")

    @property
    def support_mode(self) -> str:
        if self.kind == "gaussian_standard":
            return "general"
        if self.kind == "uniform_nonneg":
            return "nonnegative"
        return "bounded"

    @property
    def x_max(self) -> float:
        """Largest coordinate magnitude on the support (inf for Gaussian)."""
        if self.kind == "gaussian_standard":
            return float("inf")
        return max(abs(self.low), abs(self.high))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian_standard":
            return rng.standard_normal((size, self.dim))
        return rng.uniform(self.low, self.high, (size, self.dim))

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind != "gaussian_standard":
            out["low"] = self.low
            out["high"] = self.high
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "InputDistSpec":
        return cls(
            data["kind"],
            int(data["dim"]),
            float(data.get("low", -1.0)),
            float(data.get("high", 1.0)),
        )


@dataclass(frozen=True)
class TrueModel:
    """Data-generating network plus its input distribution."""

    arch: Architecture
    params: Parameters
    input_dist: InputDistSpec

    def __post_init__(self):
        self.params.validate_for(self.arch)
        if self.input_dist.dim != self.arch.input_dim:
            raise ShapeError(
                f"layer 1: input distribution has dim {self.input_dist.dim}, "
                f"network expects {self.arch.input_dim}"
            )

    def to_json_dict(self) -> dict:
        return {
            "architecture": self.arch.to_json_dict(),
            "parameters": self.params.to_json_dict(),
            "input_dist": self.input_dist.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TrueModel":
        return cls(
            Architecture.from_json_dict(data["architecture"]),
            Parameters.from_json_dict(data["parameters"]),
            InputDistSpec.from_json_dict(data["input_dist"]),
        )


@dataclass(frozen=True)
class CompatibilityReport:
    satisfied: bool
    violations: tuple[str, ...]


def check_compatibility(arch_true: Architecture, arch_model: Architecture) -> CompatibilityReport:
    """Width/depth conditions under which the model can realize the true net."""
    violations = []
    n_star, n = arch_true.depth, arch_model.depth
    if n_star > n:
        violations.append("depth")
    if arch_true.input_dim != arch_model.input_dim:
        violations.append("input_width")
    if arch_true.output_dim != arch_model.output_dim:
        violations.append("output_width")
    if arch_true.output_activation != arch_model.output_activation:
        violations.append("output_activation")
    if n_star <= n:
        for k in range(2, n_star):
            if arch_true.width(k) > arch_model.width(k):
                violations.append(f"hidden_width[{k}]")
        carry = arch_true.width(n_star - 1)
        for k in range(n_star, n):
            if carry > arch_model.width(k):
                violations.append(f"tail_width[{k}]")
    return CompatibilityReport(satisfied=not violations, violations=tuple(violations))


def require_compatible(arch_true: Architecture, arch_model: Architecture) -> None:
    report = check_compatibility(arch_true, arch_model)
    if not report.satisfied:
        raise ShapeError(
            "incompatible architectures: " + ", ".join(report.violations)
        )


def learning_coefficient_bound(
    arch_true: Architecture, arch_model: Architecture, support_mode: str
) -> Fraction:
    """Coefficient of log n in the free-energy upper bound, as an exact half-integer.

    For bounded or nonnegative input support it is half the true parameter
    count; general support adds half the layer-3 spillover block.
    """
    if support_mode not in SUPPORT_MODES:
        raise ValueError(f"support_mode must be one of {SUPPORT_MODES}")
    require_compatible(arch_true, arch_model)
    n_star = arch_true.depth
    total = arch_true.width(n_star) * (arch_true.width(n_star - 1) + 1)
    for k in range(2, n_star):
        total += arch_true.width(k) * (arch_true.width(k - 1) + 1)
    if support_mode == "general" and n_star >= 3:
        total += arch_true.width(3) * (arch_model.width(2) - arch_true.width(2))
    return Fraction(total, 2)


def _a_width(arch_true: Architecture, arch_model: Architecture, k: int) -> int:
    """Width of the signal-carrying (A) block at model layer k."""
    n_star, n = arch_true.depth, arch_model.depth
    if k == n:
        return arch_model.width(n)
    if k <= n_star - 1:
        return arch_true.width(k)
    return arch_true.width(n_star - 1)


@dataclass(frozen=True)
class EssentialSampleConfig:
    """Sampling spec for the neighborhood of the exact embedding.

    n sets the 1/sqrt(n) width of convergent coordinates, delta the width of
    the identity-block slack, and support_mode which layer-2 silencing variant
    applies. bounded_bias_floor is the bounded-mode layer-2 bias magnitude.
    """

    n: int
    delta: float = 0.05
    support_mode: str = "general"
    bounded_bias_floor: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0 < self.delta:
            raise ValueError("delta must be positive")
        if 1.0 / np.sqrt(self.n) >= min(1.0, self.delta):
            raise ValueError(
                f"need 1/sqrt(n) < min(1, delta); got n={self.n}, delta={self.delta}"
            )
        if self.support_mode not in SUPPORT_MODES:
            raise ValueError(f"support_mode must be one of {SUPPORT_MODES}")
        if self.support_mode == "bounded" and self.bounded_bias_floor < 1.0:
            raise ValueError("bounded mode needs bounded_bias_floor >= 1")

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "support_mode": self.support_mode,
            "bounded_bias_floor": self.bounded_bias_floor,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EssentialSampleConfig":
        return cls(
            int(data["n"]),
            float(data.get("delta", 0.05)),
            data.get("support_mode", "general"),
            float(data.get("bounded_bias_floor", 0.0)),
        )


def bounded_bias_floor(input_dist: InputDistSpec) -> float:
    """Smallest layer-2 silencing bias magnitude that works on a bounded box."""
    if not np.isfinite(input_dist.x_max):
        raise ValueError("bounded floor needs a bounded input distribution")
    return 2.0 * input_dist.dim * input_dist.x_max + 1.0


def _m(rng: np.random.Generator, shape) -> np.ndarray:
    """Constant-range entries from [1, 2]."""
    return rng.uniform(1.0, 2.0, shape)


def embed_true_network(
    true_model: TrueModel, arch_model: Architecture, rng: np.random.Generator
) -> Parameters:
    """Model parameters that reproduce the true network output exactly.

    Copy layers mirror the true weights on their A-block and silence B-units
    with negative biases (zero weights at layer 2, so silencing holds for any
    input sign). Carry layers are identity blocks with positive biases; the
    output layer inverts the accumulated identity product and subtracts the
    accumulated carry biases.
    """
    arch_true = true_model.arch
    require_compatible(arch_true, arch_model)
    n_star, n = arch_true.depth, arch_model.depth
    wt = true_model.params

    ws: list[np.ndarray] = []
    bs: list[np.ndarray] = []
    carry = None  # accumulated A-bias along the carry layers
    prod = None  # product of carry-layer AA blocks, latest on the left
    for k in range(2, n + 1):
        h_k, h_s = arch_model.width(k), arch_model.width(k - 1)
        a_k = _a_width(arch_true, arch_model, k)
        a_s = _a_width(arch_true, arch_model, k - 1)
        b_k, b_s = h_k - a_k, h_s - a_s
        w = np.zeros((h_k, h_s))
        b = np.zeros(h_k)
        if k == n:
            p = np.eye(a_s) if prod is None else prod
            w_aa = np.linalg.solve(p.T, wt.weight(n_star).T).T
            w[:, :a_s] = w_aa
            if b_s:
                w[:, a_s:] = _m(rng, (h_k, b_s))
            shift = np.zeros(a_s) if carry is None else carry
            b[:] = wt.bias(n_star) - w_aa @ shift
        elif k <= n_star - 1:
            w[:a_k, :a_s] = wt.weight(k)
            b[:a_k] = wt.bias(k)
            if b_s:
                w[:a_k, a_s:] = _m(rng, (a_k, b_s))
            if b_k:
                if k > 2:
                    w[a_k:, :a_s] = -_m(rng, (b_k, a_s))
                    if b_s:
                        w[a_k:, a_s:] = _m(rng, (b_k, b_s))
                b[a_k:] = -_m(rng, b_k)
        else:
            w[:a_k, :a_s] = np.eye(a_k)
            if b_s:
                w[:a_k, a_s:] = _m(rng, (a_k, b_s))
            if b_k:
                w[a_k:, :] = -_m(rng, (b_k, h_s))
            b[:a_k] = _m(rng, a_k)
            if b_k:
                b[a_k:] = -_m(rng, b_k)
            bias_a = b[:a_k].copy()
            aa = w[:a_k, :a_s]
            carry = bias_a if carry is None else aa @ carry + bias_a
            prod = aa.copy() if prod is None else aa @ prod
        ws.append(w)
        bs.append(b)
    return Parameters(tuple(ws), tuple(bs))


def _draw_essential(
    true_model: TrueModel,
    arch_model: Architecture,
    config: EssentialSampleConfig,
    rng: np.random.Generator,
) -> tuple[Parameters, float]:
    """One draw from the embedding neighborhood; returns (params, cond(P))."""
    arch_true = true_model.arch
    n_star, n = arch_true.depth, arch_model.depth
    wt = true_model.params
    eps = 1.0 / np.sqrt(config.n)
    mode = config.support_mode

    ws: list[np.ndarray] = []
    bs: list[np.ndarray] = []
    carry = None
    prod = None
    cond = 1.0
    for k in range(2, n + 1):
        h_k, h_s = arch_model.width(k), arch_model.width(k - 1)
        a_k = _a_width(arch_true, arch_model, k)
        a_s = _a_width(arch_true, arch_model, k - 1)
        b_k, b_s = h_k - a_k, h_s - a_s
        w = np.zeros((h_k, h_s))
        b = np.zeros(h_k)
        if k == n:
            p = np.eye(a_s) if prod is None else prod
            cond = float(np.linalg.cond(p))
            w_aa = np.linalg.solve(p.T, wt.weight(n_star).T).T
            w_aa = w_aa + rng.uniform(-eps, eps, (h_k, a_s))
            w[:, :a_s] = w_aa
            if b_s:
                w[:, a_s:] = _m(rng, (h_k, b_s))
            shift = np.zeros(a_s) if carry is None else carry
            b[:] = true_model.params.bias(n_star) - w_aa @ shift
            b += rng.uniform(-eps, eps, h_k)
        elif k <= n_star - 1:
            w[:a_k, :a_s] = wt.weight(k) + rng.uniform(-eps, eps, (a_k, a_s))
            b[:a_k] = true_model.params.bias(k) + rng.uniform(-eps, eps, a_k)
            if b_s:
                if k == 3 and mode == "general":
                    w[:a_k, a_s:] = rng.uniform(-eps, eps, (a_k, b_s))
                else:
                    w[:a_k, a_s:] = _m(rng, (a_k, b_s))
            if b_k:
                w[a_k:, :a_s] = -_m(rng, (b_k, a_s))
                if b_s:
                    w[a_k:, a_s:] = -_m(rng, (b_k, b_s))
                if k == 2 and mode == "bounded":
                    floor = config.bounded_bias_floor
                    b[a_k:] = -rng.uniform(floor, floor + 1.0, b_k)
                else:
                    b[a_k:] = -_m(rng, b_k)
        else:
            aa = np.eye(a_k) + rng.uniform(0.0, config.delta, (a_k, a_k))
            w[:a_k, :a_s] = aa
            if b_s:
                w[:a_k, a_s:] = _m(rng, (a_k, b_s))
            if b_k:
                w[a_k:, :a_s] = -_m(rng, (b_k, a_s))
                if b_s:
                    w[a_k:, a_s:] = -_m(rng, (b_k, b_s))
            bias_a = _m(rng, a_k)
            b[:a_k] = bias_a
            if b_k:
                b[a_k:] = -_m(rng, b_k)
            carry = bias_a if carry is None else aa @ carry + bias_a
            prod = aa.copy() if prod is None else aa @ prod
        ws.append(w)
        bs.append(b)
    return Parameters(tuple(ws), tuple(bs)), cond


def sample_essential_params(
    true_model: TrueModel,
    arch_model: Architecture,
    config: EssentialSampleConfig,
    rng: np.random.Generator,
) -> Parameters:
    """Draw one member of the embedding neighborhood W_E."""
    require_compatible(true_model.arch, arch_model)
    for _ in range(_MAX_RESAMPLE):
        params, cond = _draw_essential(true_model, arch_model, config, rng)
        if cond < _COND_LIMIT:
            return params
    raise RuntimeError(
        f"carry-layer product stayed numerically singular after {_MAX_RESAMPLE} draws"
    )


@dataclass(frozen=True)
class CoordinateCounts:
    """How many sampled coordinates fall in each interval-width class."""

    convergent: int  # width 2/sqrt(n)
    slack: int  # width delta
    constant: int  # width 1

    @property
    def total(self) -> int:
        return self.convergent + self.slack + self.constant


def essential_coordinate_counts(
    arch_true: Architecture, arch_model: Architecture, support_mode: str
) -> CoordinateCounts:
    """Coordinate census of the neighborhood sampler, matching its draw layout."""
    require_compatible(arch_true, arch_model)
    n_star, n = arch_true.depth, arch_model.depth
    convergent = slack = constant = 0
    for k in range(2, n + 1):
        h_k, h_s = arch_model.width(k), arch_model.width(k - 1)
        a_k = _a_width(arch_true, arch_model, k)
        a_s = _a_width(arch_true, arch_model, k - 1)
        b_k, b_s = h_k - a_k, h_s - a_s
        if k == n:
            convergent += h_k * a_s + h_k
            constant += h_k * b_s
        elif k <= n_star - 1:
            convergent += a_k * a_s + a_k
            if k == 3 and support_mode == "general":
                convergent += a_k * b_s
            else:
                constant += a_k * b_s
            constant += b_k * a_s + b_k * b_s + b_k
        else:
            slack += a_k * a_k
            constant += a_k * b_s + b_k * h_s + a_k + b_k
    return CoordinateCounts(convergent, slack, constant)


def essential_log_volume(
    arch_true: Architecture, arch_model: Architecture, config: EssentialSampleConfig
) -> float:
    """log Vol of the neighborhood: product of coordinate interval widths."""
    counts = essential_coordinate_counts(arch_true, arch_model, config.support_mode)
    return counts.convergent * np.log(2.0 / np.sqrt(config.n)) + counts.slack * np.log(
        config.delta
    )


def verify_realization(
    true_model: TrueModel,
    arch_model: Architecture,
    params: Parameters,
    num_inputs: int,
    rng: np.random.Generator,
) -> float:
    """Max output deviation from the true network over sampled inputs."""
    params.validate_for(arch_model)
    x = true_model.input_dist.sample(rng, num_inputs)
    out_model = forward(arch_model, params, x)
    out_true = forward(true_model.arch, true_model.params, x)
    return float(np.linalg.norm(out_model - out_true, axis=-1).max())


def silenced_block_output(
    true_model: TrueModel,
    arch_model: Architecture,
    params: Parameters,
    x: np.ndarray,
    k: int,
) -> np.ndarray:
    """B-block activations at layer k (empty when the layer has no B-units)."""
    a_k = _a_width(true_model.arch, arch_model, k)
    values = layer_output(arch_model, params, x, k).values
    return values[..., a_k:]


def signal_block_output(
    true_model: TrueModel,
    arch_model: Architecture,
    params: Parameters,
    x: np.ndarray,
    k: int,
) -> np.ndarray:
    """A-block activations at layer k: the copy of the true network's units."""
    a_k = _a_width(true_model.arch, arch_model, k)
    values = layer_output(arch_model, params, x, k).values
    return values[..., :a_k]


@dataclass(frozen=True)
class ProfilePoint:
    n: int
    sup_dev: float  # worst normalized deviation over trials and inputs
    median_dev: float  # median over trials of the per-trial worst deviation


def essential_error_profile(
    true_model: TrueModel,
    arch_model: Architecture,
    n_list: list[int],
    trials: int,
    num_inputs: int,
    rng: np.random.Generator,
    delta: float | None = None,
) -> list[ProfilePoint]:
    """Worst normalized output deviation of neighborhood samples, per n.

    delta defaults to max(0.05, 2/sqrt(min n)) so one n-independent slack width
    is valid across the whole grid.
    """
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be ascending")
    if any(n < 4 for n in n_list):
        raise ValueError("each n must be at least 4")
    if delta is None:
        delta = max(0.05, 2.0 / np.sqrt(min(n_list)))
    mode = true_model.input_dist.support_mode
    floor = bounded_bias_floor(true_model.input_dist) if mode == "bounded" else 0.0
    points = []
    for n in n_list:
        config = EssentialSampleConfig(
            n=n, delta=delta, support_mode=mode, bounded_bias_floor=floor
        )
        per_trial = []
        for _ in range(trials):
            params = sample_essential_params(true_model, arch_model, config, rng)
            x = true_model.input_dist.sample(rng, num_inputs)
            dev = np.linalg.norm(
                forward(arch_model, params, x)
                - forward(true_model.arch, true_model.params, x),
                axis=-1,
            )
            scale = np.linalg.norm(x, axis=-1) + 1.0
            per_trial.append(float((dev / scale).max()))
        points.append(
            ProfilePoint(
                n=n,
                sup_dev=float(max(per_trial)),
                median_dev=float(np.median(per_trial)),
            )
        )
    return points
