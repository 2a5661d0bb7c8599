"""Single-node feedforward / backpropagation / update math.

Serves as the fault-free reference for every distributed strategy and
provides the per-block kernels the simulated nodes run.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 0.1


class ShapeError(ValueError):
    """Raised when vectors or matrices do not match the layer chain."""


class Activation(str, Enum):
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


def activation_f(u, activation=Activation.SIGMOID):
    u = np.asarray(u, dtype=float)
    if Activation(activation) is Activation.IDENTITY:
        return u.copy()
    return 1.0 / (1.0 + np.exp(-u))


def activation_g(y, activation=Activation.SIGMOID):
    """g with g(f(u)) = f'(u)."""
    y = np.asarray(y, dtype=float)
    if Activation(activation) is Activation.IDENTITY:
        return np.ones_like(y)
    return y * (1.0 - y)


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"layer dims must be >= 1, got {self.out_dim}x{self.in_dim}")


def layer_chain(dims, activation=Activation.SIGMOID):
    """[N0, N1, ..., NL] -> L LayerSpecs."""
    if len(dims) < 2:
        raise ShapeError(f"need at least input and output dims, got {list(dims)}")
    return [LayerSpec(dims[i], dims[i + 1], Activation(activation)) for i in range(len(dims) - 1)]


@dataclass
class DnnState:
    layers: List[LayerSpec]
    weights: List[np.ndarray]
    learning_rate: float = DEFAULT_LEARNING_RATE
    iteration: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ShapeError(f"learning rate must be > 0, got {self.learning_rate}")
        if len(self.weights) != len(self.layers):
            raise ShapeError("one weight matrix per layer required")
        for spec, w in zip(self.layers, self.weights):
            if w.shape != (spec.out_dim, spec.in_dim):
                raise ShapeError(f"weight shape {w.shape} does not match {spec.out_dim}x{spec.in_dim}")

    @classmethod
    def initialize(cls, layers, seed=0, learning_rate=DEFAULT_LEARNING_RATE, init_scale=None):
        """Uniform init in +-init_scale, Glorot range when no scale is given."""
        rng = np.random.default_rng(seed)
        weights = []
        for spec in layers:
            scale = init_scale if init_scale is not None else np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
            weights.append(rng.uniform(-scale, scale, size=(spec.out_dim, spec.in_dim)))
        return cls(list(layers), weights, learning_rate)

    def copy(self):
        return DnnState(list(self.layers), [w.copy() for w in self.weights],
                        self.learning_rate, self.iteration)


@dataclass
class ForwardTrace:
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    output: np.ndarray = None


def oracle_feedforward(state, data):
    """s^l = W^l x^l, x^(l+1) = f(s^l) for every layer."""
    x = np.asarray(data, dtype=float).ravel()
    if x.size != state.layers[0].in_dim:
        raise ShapeError(f"input has {x.size} entries, layer 1 expects {state.layers[0].in_dim}")
    trace = ForwardTrace()
    for spec, w in zip(state.layers, state.weights):
        trace.inputs.append(x)
        s = w @ x
        trace.pre_activations.append(s)
        x = activation_f(s, spec.activation)
    trace.output = x
    return trace


def squared_error(output, label):
    diff = np.asarray(output, dtype=float) - np.asarray(label, dtype=float)
    return float(diff @ diff)


def output_delta(output, label, activation=Activation.SIGMOID):
    """delta^L = -d(eps^2)/ds^L = -2 (y_hat - y) * g(y_hat)."""
    output = np.asarray(output, dtype=float)
    label = np.asarray(label, dtype=float).ravel()
    if label.size != output.size:
        raise ShapeError(f"label has {label.size} entries, output has {output.size}")
    return -2.0 * (output - label) * activation_g(output, activation)


def oracle_backprop(state, trace, label):
    """Per-layer delta^1..delta^L, with delta = -d(eps^2)/ds."""
    deltas = [None] * len(state.layers)
    delta = output_delta(trace.output, label, state.layers[-1].activation)
    deltas[-1] = delta
    for idx in range(len(state.layers) - 1, 0, -1):
        c = state.weights[idx].T @ delta
        # D^l is diagonal with g(x^l_i); x^l was produced by the previous layer's activation
        delta = c * activation_g(trace.inputs[idx], state.layers[idx - 1].activation)
        deltas[idx - 1] = delta
    return deltas


def oracle_update(state, trace, deltas):
    """W^l += eta delta^l (x^l)^T, returning a new state."""
    new_state = state.copy()
    for idx, (delta, x) in enumerate(zip(deltas, trace.inputs)):
        new_state.weights[idx] += state.learning_rate * np.outer(delta, x)
    new_state.iteration += 1
    return new_state


def oracle_step(state, data, label):
    trace = oracle_feedforward(state, data)
    deltas = oracle_backprop(state, trace, label)
    return oracle_update(state, trace, deltas), squared_error(trace.output, label)


def predict(weights, layers, images):
    """Batched feedforward for evaluation; images are rows."""
    out = np.asarray(images, dtype=float).T
    for spec, w in zip(layers, weights):
        out = activation_f(w @ out, spec.activation)
    return out.T


def accuracy(weights, layers, images, labels):
    """Top-1 argmax match rate against one-hot labels."""
    if len(images) == 0:
        return float("nan")
    scores = predict(weights, layers, images)
    return float(np.mean(np.argmax(scores, axis=1) == np.argmax(labels, axis=1)))


# Block kernels run by the simulated nodes

def block_matvec(block, x):
    return block @ x, 2 * block.size


def block_vecmat(delta, block):
    return delta @ block, 2 * block.size


def block_rank1(block, eta, delta, x):
    return block + eta * np.outer(delta, x), 2 * block.size
