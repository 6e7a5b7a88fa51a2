"""Plain fully-connected network with explicit forward/backward passes.

Hidden layers use ReLU, the final layer is identity, so the raw output
activations carry sign and scale information the losses rely on.
Prediction is argmax over the outputs and involves no cost matrix; a
cost-sensitively trained network is served exactly like any other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, ParseError, ShapeError, StateError

CHECKPOINT_FORMAT = "costsense-checkpoint"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (fan_out, fan_in)
    bias: np.ndarray  # (fan_out,)
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeError(f"layer shapes disagree: {w.shape} vs {b.shape}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.weights.shape[1] != a.weights.shape[0]:
                raise ShapeError("consecutive layer dimensions do not chain")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].weights.shape[1],) + tuple(
            layer.weights.shape[0] for layer in self.layers
        )

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError("learning rate must be positive and finite")
        if self.batch_size < 1:
            raise ConfigError("batch size must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")


def init_network(dims, seed) -> Network:
    """Scaled-uniform weight init, zero biases, deterministic in ``seed``.

    ``dims`` lists layer widths input-first, e.g. (2, 16, 5). Weights are
    drawn from U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeError(f"dims must list at least two positive widths, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        activation = "identity" if i == len(dims) - 2 else "relu"
        layers.append(Layer(weights, np.zeros(fan_out), activation))
    return Network(tuple(layers))


@dataclass(frozen=True)
class ForwardCache:
    """Intermediates one backward pass needs; bound to a network's dims."""

    dims: tuple[int, ...]
    inputs: tuple[np.ndarray, ...]  # input to each layer
    preacts: tuple[np.ndarray, ...]  # pre-activation of each layer
    batched: bool


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def forward_batch(net: Network, x: np.ndarray):
    """Forward a (batch, input_dim) matrix.

    Returns (outputs, features, cache) where features are the
    post-activation values feeding the final layer. For a single-layer
    network that is the input itself.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(
            f"input has shape {x.shape}, expected (batch, {net.input_dim})"
        )
    a = x
    inputs, preacts = [], []
    for layer in net.layers:
        inputs.append(a)
        z = a @ layer.weights.T + layer.bias
        preacts.append(z)
        a = _apply(layer.activation, z)
    cache = ForwardCache(net.dims, tuple(inputs), tuple(preacts), batched=True)
    return a, inputs[-1], cache


def forward_pass(net: Network, x: np.ndarray):
    """Forward a single sample; returns (outputs, features, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {x.shape}")
    out, feats, batch_cache = forward_batch(net, x[None, :])
    cache = ForwardCache(
        net.dims,
        tuple(a[0] for a in batch_cache.inputs),
        tuple(z[0] for z in batch_cache.preacts),
        batched=False,
    )
    return out[0], feats[0], cache


def _check_cache(net: Network, cache: ForwardCache, grad_o: np.ndarray, batched: bool):
    if cache.dims != net.dims:
        raise StateError(
            f"cache built for dims {cache.dims}, network has dims {net.dims}"
        )
    if cache.batched != batched:
        raise StateError("cache batching does not match the backward call")
    expected = (cache.preacts[-1].shape[0], net.output_dim) if batched else (net.output_dim,)
    if grad_o.shape != expected:
        raise ShapeError(f"output gradient has shape {grad_o.shape}, expected {expected}")


def backward_batch(net: Network, cache: ForwardCache, grad_outputs: np.ndarray):
    """Backpropagate per-sample output gradients; returns batch-mean grads.

    The result is a list of (dW, db) pairs aligned with ``net.layers``.
    """
    g = np.asarray(grad_outputs, dtype=np.float64)
    _check_cache(net, cache, g, batched=True)
    batch = g.shape[0]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    delta = g
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.activation == "relu":
            delta = delta * (cache.preacts[i] > 0.0)
        grads[i] = (delta.T @ cache.inputs[i] / batch, delta.mean(axis=0))
        if i:
            delta = delta @ layer.weights
    return grads


def backward_pass(net: Network, cache: ForwardCache, grad_o: np.ndarray):
    """Single-sample backward; returns per-layer (dW, db)."""
    g = np.asarray(grad_o, dtype=np.float64)
    _check_cache(net, cache, g, batched=False)
    batch_cache = ForwardCache(
        cache.dims,
        tuple(a[None, :] for a in cache.inputs),
        tuple(z[None, :] for z in cache.preacts),
        batched=True,
    )
    return backward_batch(net, batch_cache, g[None, :])


def sgd_step(net: Network, grads, config: SgdConfig) -> Network:
    """One plain gradient step; returns the updated network."""
    if len(grads) != len(net.layers):
        raise StateError("gradient list does not match the network's layers")
    lr = config.learning_rate
    new_layers = []
    for layer, (dw, db) in zip(net.layers, grads):
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise ShapeError("gradient shapes do not match the layer")
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise NumericError("non-finite gradient")
        new_layers.append(
            Layer(layer.weights - lr * dw, layer.bias - lr * db, layer.activation)
        )
    return Network(tuple(new_layers))


def predict_batch(net: Network, x: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest index."""
    outputs, _, _ = forward_batch(net, x)
    return np.argmax(outputs, axis=1)


def predict(net: Network, x: np.ndarray) -> int:
    outputs, _, _ = forward_pass(net, x)
    return int(np.argmax(outputs))


# ---------------------------------------------------------------------------
# Checkpoints: a self-describing JSON container, deterministic for a given
# network so repeat runs produce byte-identical files.


def save_checkpoint(net: Network, cost_entries: np.ndarray, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dims": list(net.dims),
        "activations": [layer.activation for layer in net.layers],
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ],
        "cost_matrix": np.asarray(cost_entries, dtype=np.float64).tolist(),
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (network, cost_matrix_entries)."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"checkpoint {path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"checkpoint {path}: missing format marker")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError(
            f"checkpoint {path}: unsupported version {payload.get('version')!r}"
        )
    layers = tuple(
        Layer(np.array(spec["weights"]), np.array(spec["bias"]), act)
        for spec, act in zip(payload["layers"], payload["activations"])
    )
    net = Network(layers)
    if list(net.dims) != payload["dims"]:
        raise ParseError(f"checkpoint {path}: dims do not match layer shapes")
    return net, np.array(payload["cost_matrix"], dtype=np.float64)
