"""Sequential linear models: layer container, activations, validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

from .errors import InvalidInputError, ShapeError, ValidationError
from .tensor import as_matrix, as_vector

ACTIVATIONS = ("none", "relu", "gelu")
# activations f with f(x / s) = f(x) / s for every s > 0
HOMOGENEOUS = ("none", "relu")


def apply_activation(z: np.ndarray, name: str) -> np.ndarray:
    if name == "none":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "gelu":
        return 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))
    raise InvalidInputError(f"unknown activation {name!r}")


@dataclass(frozen=True, eq=False)
class LinearLayer:
    """``act((x / input_scale) @ weight + bias)``.

    ``weight`` is ``in_dim x out_dim`` so that rows are input channels.
    ``input_scale`` is an optional per-input-channel divisor, used where an
    equalization scale could not be folded into the producer of ``x``.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "none"
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        w = as_matrix(self.weight, name="weight")
        b = as_vector(self.bias, name="bias")
        if b.shape[0] != w.shape[1]:
            raise ShapeError(f"bias length {b.shape[0]} != weight cols {w.shape[1]}")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        if self.input_scale is not None:
            s = as_vector(self.input_scale, name="input_scale")
            if s.shape[0] != w.shape[0]:
                raise ShapeError(f"input_scale length {s.shape[0]} != weight rows {w.shape[0]}")
            if np.any(s <= 0):
                raise InvalidInputError("input_scale must be strictly positive")
            object.__setattr__(self, "input_scale", s)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def effective_input(self, x: np.ndarray) -> np.ndarray:
        return x if self.input_scale is None else x / self.input_scale

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_activation(self.effective_input(x) @ self.weight + self.bias, self.activation)

    def replace(self, **changes) -> "LinearLayer":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    input_dim: int
    layers: list[LinearLayer] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "layers", list(self.layers))
        dim = int(self.input_dim)
        if dim < 1:
            raise ValidationError(f"input_dim must be positive, got {self.input_dim}")
        for k, layer in enumerate(self.layers):
            if layer.in_dim != dim:
                where = "model input" if k == 0 else f"layer {k - 1} (out_dim={dim})"
                raise ValidationError(
                    f"dimension chain broken between {where} and layer {k} (in_dim={layer.in_dim})"
                )
            dim = layer.out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.input_dim

    def __len__(self) -> int:
        return len(self.layers)


def random_mlp(dims, *, activation: str = "relu", seed: int = 0, bias_scale: float = 0.1) -> ModelSpec:
    """He-initialised MLP; the last layer has no activation.

    Parameters are rounded to float32 so that the model survives a round
    trip through the tensor container unchanged.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for k, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = rng.standard_normal((d_in, d_out)) * np.sqrt(2.0 / d_in)
        b = rng.standard_normal(d_out) * bias_scale
        act = activation if k < len(dims) - 2 else "none"
        layers.append(LinearLayer(w.astype(np.float32), b.astype(np.float32), act))
    return ModelSpec(int(dims[0]), layers)
