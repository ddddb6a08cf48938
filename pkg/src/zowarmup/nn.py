"""Flat-parameter multilayer perceptron with exact backpropagation.

Parameters live in one float64 vector laid out layer by layer as
``[W_1 (in_1 x out_1, row-major), b_1, W_2, b_2, ...]``. Hidden layers use
ReLU; the output layer produces logits scored with softmax cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericError
from .rng import SeedStream

ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ConfigError("an MLP needs at least an input and an output width", field="layer_widths")
        if any(w < 1 for w in widths):
            raise ConfigError(f"layer widths must be positive, got {widths}", field="layer_widths")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unsupported activation {self.activation!r}", field="activation")

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    def layer_shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_widths[:-1], self.layer_widths[1:]))


@dataclass(frozen=True)
class ModelDescriptor:
    """Sizes needed by the cost model: parameter count and per-layer output shapes."""

    param_count: int
    layer_outputs: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        outputs = tuple(tuple(int(v) for v in triple) for triple in self.layer_outputs)
        object.__setattr__(self, "layer_outputs", outputs)
        if self.param_count <= 0:
            raise ConfigError("param_count must be positive", field="param_count")
        for triple in outputs:
            if len(triple) != 3 or min(triple) < 1:
                raise ConfigError(f"layer output {triple} is not a positive (N, W, H) triple",
                                  field="layer_outputs")

    @property
    def activation_sizes(self) -> list[int]:
        return [n * w * h for n, w, h in self.layer_outputs]


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise ConfigError(f"features must be a matrix, got shape {x.shape}")
        if y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ConfigError(f"{x.shape[0]} feature rows but labels have shape {y.shape}")
        if x.shape[0] < 1:
            raise ConfigError("a batch needs at least one sample")
        if not np.issubdtype(y.dtype, np.integer):
            raise ConfigError("labels must be integers")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y.astype(np.int64, copy=False))

    def __len__(self):
        return self.labels.shape[0]

    def take(self, index) -> "Batch":
        return Batch(self.features[index], self.labels[index])


def parameter_count(spec: MlpSpec) -> int:
    return sum(i * o + o for i, o in spec.layer_shapes())


def unflatten(spec: MlpSpec, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer ``(W, b)`` views (no copies)."""
    _check_length(spec, w)
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_shapes():
        weight = w[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        bias = w[offset:offset + fan_out]
        offset += fan_out
        layers.append((weight, bias))
    return layers


def flatten(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for weight, bias in layers:
        parts.append(np.asarray(weight, dtype=np.float64).ravel())
        parts.append(np.asarray(bias, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_params(spec: MlpSpec, stream: SeedStream) -> np.ndarray:
    """Uniform initialisation in +-1/sqrt(fan_in), one child stream per layer."""
    parts = []
    for index, (fan_in, fan_out) in enumerate(spec.layer_shapes()):
        bound = 1.0 / np.sqrt(fan_in)
        u = stream.spawn("layer", index).uniform(fan_in * fan_out + fan_out)
        parts.append(bound * (2.0 * u - 1.0))
    return np.concatenate(parts)


def descriptor_of(spec: MlpSpec) -> ModelDescriptor:
    return ModelDescriptor(
        param_count=parameter_count(spec),
        layer_outputs=tuple((fan_out, 1, 1) for _, fan_out in spec.layer_shapes()),
    )


def _check_length(spec, w):
    expected = parameter_count(spec)
    if np.ndim(w) != 1 or len(w) != expected:
        raise ConfigError(f"parameter vector has shape {np.shape(w)}, expected ({expected},)")


def _check_labels(spec, batch):
    if batch.features.shape[1] != spec.input_dim:
        raise ConfigError(f"batch has {batch.features.shape[1]} features, model expects {spec.input_dim}")
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ConfigError(f"labels must lie in [0, {spec.num_classes})")


def _forward_pass(spec, w, batch, keep):
    _check_length(spec, w)
    _check_labels(spec, batch)
    layers = unflatten(spec, w)
    h = batch.features
    cache = [h] if keep else None
    last = len(layers) - 1
    for index, (weight, bias) in enumerate(layers):
        with np.errstate(over="ignore", invalid="ignore"):
            z = h @ weight + bias
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite pre-activations in layer {index}")
        h = z if index == last else np.maximum(z, 0.0)
        if keep:
            cache.append(h)
    return h, cache


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _cross_entropy(logits, labels):
    logp = _log_softmax(logits)
    return -float(np.mean(logp[np.arange(labels.shape[0]), labels])), logp


def forward(spec: MlpSpec, w: np.ndarray, batch: Batch) -> tuple[np.ndarray, float]:
    """Return ``(logits, mean cross-entropy)`` for ``batch`` under weights ``w``."""
    logits, _ = _forward_pass(spec, w, batch, keep=False)
    loss, _ = _cross_entropy(logits, batch.labels)
    if not np.isfinite(loss):
        raise NumericError("cross-entropy loss is not finite")
    return logits, loss


def loss(spec: MlpSpec, w: np.ndarray, batch: Batch) -> float:
    return forward(spec, w, batch)[1]


def loss_and_grad(spec: MlpSpec, w: np.ndarray, batch: Batch) -> tuple[float, np.ndarray]:
    logits, acts = _forward_pass(spec, w, batch, keep=True)
    value, logp = _cross_entropy(logits, batch.labels)
    if not np.isfinite(value):
        raise NumericError("cross-entropy loss is not finite")
    n = batch.labels.shape[0]
    delta = np.exp(logp)
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    layers = unflatten(spec, w)
    grads = [None] * len(layers)
    for index in range(len(layers) - 1, -1, -1):
        weight, _ = layers[index]
        h_in = acts[index]
        grads[index] = (h_in.T @ delta, delta.sum(axis=0))
        if index > 0:
            delta = (delta @ weight.T) * (acts[index] > 0.0)
    return value, flatten(grads)


def backward(spec: MlpSpec, w: np.ndarray, batch: Batch) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the flat weights."""
    return loss_and_grad(spec, w, batch)[1]


def predict(spec: MlpSpec, w: np.ndarray, features: np.ndarray) -> np.ndarray:
    layers = unflatten(spec, w)
    h = np.asarray(features, dtype=np.float64)
    for index, (weight, bias) in enumerate(layers):
        h = h @ weight + bias
        if index < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return np.argmax(h, axis=1)


def evaluate(spec: MlpSpec, w: np.ndarray, batch: Batch) -> tuple[float, float]:
    """Accuracy and mean loss on ``batch``."""
    logits, value = forward(spec, w, batch)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == batch.labels))
    return accuracy, value
