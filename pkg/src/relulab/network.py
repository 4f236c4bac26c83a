"""Deep ReLU networks: architectures, parameters, forward evaluation, norm checks.

Layers are numbered 1..N with layer 1 the input. Weights and biases are indexed
by destination layer k = 2..N, so w(k) has shape (H_k, H_{k-1}). Hidden layers
always apply relu; the output layer applies relu or identity depending on the
architecture's output_activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTPUT_ACTIVATIONS = ("relu", "linear")


class ShapeError(ValueError):
    """Parameter/architecture mismatch, naming the offending layer."""


def relu(t: np.ndarray) -> np.ndarray:
    """Elementwise max(t, 0)."""
    return np.maximum(t, 0.0)


@dataclass(frozen=True)
class Architecture:
    """Layer widths (H_1, ..., H_N) plus the output-layer activation."""

    widths: tuple[int, ...]
    output_activation: str = "relu"

    def __post_init__(self):
        widths = tuple(int(h) for h in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise ShapeError("need at least an input and an output layer")
        for i, h in enumerate(widths):
            if h < 1:
                raise ShapeError(f"layer {i + 1}: width must be positive, got {h}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ShapeError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}, "
                f"got {self.output_activation!r}"
            )

    @property
    def depth(self) -> int:
        return len(self.widths)

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def width(self, k: int) -> int:
        """Width of layer k, 1-based."""
        if not 1 <= k <= self.depth:
            raise ShapeError(f"layer {k}: out of range 1..{self.depth}")
        return self.widths[k - 1]

    def to_json_dict(self) -> dict:
        return {"widths": list(self.widths), "output_activation": self.output_activation}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Architecture":
        return cls(tuple(data["widths"]), data.get("output_activation", "relu"))


@dataclass(frozen=True)
class Parameters:
    """Weights and biases indexed by destination layer; entry i maps layer i+1 to i+2."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        if len(ws) != len(bs):
            raise ShapeError(
                f"{len(ws)} weight matrices but {len(bs)} bias vectors"
            )
        for arr in ws + bs:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def weight(self, k: int) -> np.ndarray:
        """Weight matrix into layer k."""
        return self.weights[k - 2]

    def bias(self, k: int) -> np.ndarray:
        """Bias vector of layer k."""
        return self.biases[k - 2]

    def validate_for(self, arch: Architecture) -> None:
        """Raise ShapeError naming the first layer whose shapes disagree with arch."""
        if len(self.weights) != arch.depth - 1:
            raise ShapeError(
                f"expected {arch.depth - 1} weight matrices for depth {arch.depth}, "
                f"got {len(self.weights)}"
            )
        for k in range(2, arch.depth + 1):
            want = (arch.width(k), arch.width(k - 1))
            w = self.weight(k)
            if w.shape != want:
                raise ShapeError(f"layer {k}: weight shape {w.shape}, expected {want}")
            b = self.bias(k)
            if b.shape != (arch.width(k),):
                raise ShapeError(
                    f"layer {k}: bias shape {b.shape}, expected ({arch.width(k)},)"
                )

    def to_json_dict(self) -> dict:
        return {
            "weights": {str(k + 2): w.tolist() for k, w in enumerate(self.weights)},
            "biases": {str(k + 2): b.tolist() for k, b in enumerate(self.biases)},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Parameters":
        layers = sorted(int(k) for k in data["weights"])
        ws = tuple(np.asarray(data["weights"][str(k)], dtype=float) for k in layers)
        bs = tuple(np.asarray(data["biases"][str(k)], dtype=float) for k in layers)
        return cls(ws, bs)

    @classmethod
    def zeros(cls, arch: Architecture) -> "Parameters":
        ws = tuple(
            np.zeros((arch.width(k), arch.width(k - 1))) for k in range(2, arch.depth + 1)
        )
        bs = tuple(np.zeros(arch.width(k)) for k in range(2, arch.depth + 1))
        return cls(ws, bs)


@dataclass(frozen=True)
class LayerOutput:
    """Activations of one layer for one input."""

    values: np.ndarray
    layer_index: int


def forward(arch: Architecture, params: Parameters, x: np.ndarray) -> np.ndarray:
    """Network output; x may be a single input (H_1,) or a batch (..., H_1)."""
    f = np.asarray(x, dtype=float)
    if f.shape[-1] != arch.input_dim:
        raise ShapeError(
            f"layer 1: input has {f.shape[-1]} features, expected {arch.input_dim}"
        )
    for k in range(2, arch.depth + 1):
        z = f @ params.weight(k).T + params.bias(k)
        if k < arch.depth or arch.output_activation == "relu":
            f = relu(z)
        else:
            f = z
    return f


def layer_output(arch: Architecture, params: Parameters, x: np.ndarray, k: int) -> LayerOutput:
    """Activations f^(k)(w, b, x); k = 1 returns the input itself."""
    if not 1 <= k <= arch.depth:
        raise ShapeError(f"layer {k}: out of range 1..{arch.depth}")
    f = np.asarray(x, dtype=float)
    for j in range(2, k + 1):
        z = f @ params.weight(j).T + params.bias(j)
        if j < arch.depth or arch.output_activation == "relu":
            f = relu(z)
        else:
            f = z
    return LayerOutput(values=f, layer_index=k)


def operator_norm(mat: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    a = np.asarray(mat, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def contraction_check(
    s: np.ndarray, t: np.ndarray, activation=relu
) -> tuple[float, float]:
    """(||a(s) - a(t)||, ||s - t||); relu never expands distances."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape != t.shape:
        raise ShapeError(f"vector shapes differ: {s.shape} vs {t.shape}")
    lhs = float(np.linalg.norm(activation(s) - activation(t)))
    rhs = float(np.linalg.norm(s - t))
    return lhs, rhs


def layer_lipschitz_check(
    arch: Architecture,
    params_a: Parameters,
    params_b: Parameters,
    x: np.ndarray,
    k: int,
) -> tuple[float, float]:
    """Layer-k output difference vs its operator-norm bound.

    rhs = ||w_a(k) - w_b(k)||_op ||f^(k-1)(a)|| + ||b_a(k) - b_b(k)||
          + ||w_b(k)||_op ||f^(k-1)(a) - f^(k-1)(b)||.
    """
    if not 2 <= k <= arch.depth:
        raise ShapeError(f"layer {k}: out of range 2..{arch.depth}")
    fa_prev = layer_output(arch, params_a, x, k - 1).values
    fb_prev = layer_output(arch, params_b, x, k - 1).values
    fa = layer_output(arch, params_a, x, k).values
    fb = layer_output(arch, params_b, x, k).values
    lhs = float(np.linalg.norm(fa - fb))
    rhs = (
        operator_norm(params_a.weight(k) - params_b.weight(k)) * float(np.linalg.norm(fa_prev))
        + float(np.linalg.norm(params_a.bias(k) - params_b.bias(k)))
        + operator_norm(params_b.weight(k)) * float(np.linalg.norm(fa_prev - fb_prev))
    )
    return lhs, rhs


def layer_norm_check(
    arch: Architecture, params: Parameters, x: np.ndarray, k: int
) -> tuple[float, float]:
    """Layer-k output norm vs the unrolled product bound.

    rhs = prod_{j=2..k} ||w(j)||_op ||x|| + ||b(k)||
          + sum_{m=2}^{k-1} prod_{j=m+1..k} ||w(j)||_op ||b(m)||.
    """
    if not 2 <= k <= arch.depth:
        raise ShapeError(f"layer {k}: out of range 2..{arch.depth}")
    lhs = float(np.linalg.norm(layer_output(arch, params, x, k).values))
    norms = {j: operator_norm(params.weight(j)) for j in range(2, k + 1)}
    rhs = float(np.prod([norms[j] for j in range(2, k + 1)])) * float(np.linalg.norm(x))
    rhs += float(np.linalg.norm(params.bias(k)))
    for m in range(2, k):
        tail = float(np.prod([norms[j] for j in range(m + 1, k + 1)]))
        rhs += tail * float(np.linalg.norm(params.bias(m)))
    return lhs, rhs


# --- flat parameter vectors -------------------------------------------------
#
# Flat layout, used by the samplers and quadrature: for k = 2..N, the weight
# matrix into layer k in row-major order, then the bias of layer k.


def param_count(arch: Architecture) -> int:
    """Total number of weights and biases."""
    return sum(
        arch.width(k) * (arch.width(k - 1) + 1) for k in range(2, arch.depth + 1)
    )


def flat_slices(arch: Architecture) -> list[tuple[str, int, slice, tuple[int, ...]]]:
    """(kind, layer, slice, shape) records describing the flat layout."""
    out = []
    pos = 0
    for k in range(2, arch.depth + 1):
        shape = (arch.width(k), arch.width(k - 1))
        size = shape[0] * shape[1]
        out.append(("weight", k, slice(pos, pos + size), shape))
        pos += size
        out.append(("bias", k, slice(pos, pos + shape[0]), (shape[0],)))
        pos += shape[0]
    return out


def flat_index(arch: Architecture, kind: str, k: int, i: int, j: int | None = None) -> int:
    """Flat position of weight (k, i, j) or bias (k, i)."""
    for rec_kind, rec_k, sl, shape in flat_slices(arch):
        if rec_kind == kind and rec_k == k:
            if kind == "weight":
                if j is None:
                    raise ShapeError(f"layer {k}: weight index needs a column")
                return sl.start + i * shape[1] + j
            return sl.start + i
    raise ShapeError(f"layer {k}: no {kind} block")


def pack(arch: Architecture, params: Parameters) -> np.ndarray:
    """Flatten parameters into a single vector."""
    params.validate_for(arch)
    pieces = []
    for k in range(2, arch.depth + 1):
        pieces.append(params.weight(k).ravel())
        pieces.append(params.bias(k))
    return np.concatenate(pieces)


def unpack(arch: Architecture, theta: np.ndarray) -> Parameters:
    """Inverse of pack for a single flat vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_count(arch),):
        raise ShapeError(
            f"flat vector has shape {theta.shape}, expected ({param_count(arch)},)"
        )
    ws, bs = [], []
    for kind, _k, sl, shape in flat_slices(arch):
        block = theta[sl].reshape(shape)
        if kind == "weight":
            ws.append(block)
        else:
            bs.append(block)
    return Parameters(tuple(ws), tuple(bs))


def forward_flat(arch: Architecture, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batched forward pass over flat parameter vectors.

    theta: (..., D) flat parameters; x: (n, H_1) inputs.
    Returns (..., n, H_N) outputs.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    batch = theta.shape[:-1]
    n = x.shape[0]
    f = np.broadcast_to(x, batch + x.shape)
    for kind, k, sl, shape in flat_slices(arch):
        if kind == "weight":
            w = theta[..., sl].reshape(batch + shape)
            z = np.einsum("...ab,...nb->...na", w, f)
        else:
            b = theta[..., sl]
            z = z + b[..., None, :]
            if k < arch.depth or arch.output_activation == "relu":
                f = np.maximum(z, 0.0)
            else:
                f = z
    return f
