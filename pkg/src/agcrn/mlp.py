"""Fully connected feed-forward networks with a linear output layer.

Weight matrices are stored one per consecutive layer pair with shape
``(n_out, n_in + 1)``: rows are destination neurons and the last column
holds the bias (an implicit +1 input).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

MAX_HIDDEN_LAYERS = 3
MAX_HIDDEN_UNITS = 12
_CLAMP = 500.0


class TransferFn(enum.Enum):
    LINEAR = "linear"
    TANH = "tanh"
    LOGSIG = "logsig"


def apply_transfer(fn: TransferFn, x):
    """Evaluate ``fn`` elementwise. Accepts scalars or arrays."""
    if fn is TransferFn.LINEAR:
        return x
    z = np.clip(x, -_CLAMP, _CLAMP)
    if fn is TransferFn.TANH:
        return np.tanh(z)
    if fn is TransferFn.LOGSIG:
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown transfer function {fn!r}")


def transfer_derivative(fn: TransferFn, activation):
    """Derivative of ``fn`` expressed through its output value."""
    if fn is TransferFn.LINEAR:
        return np.ones_like(activation)
    if fn is TransferFn.TANH:
        return 1.0 - activation * activation
    if fn is TransferFn.LOGSIG:
        return activation * (1.0 - activation)
    raise ValueError(f"unknown transfer function {fn!r}")


@dataclass(frozen=True)
class Architecture:
    input_size: int
    hidden_sizes: tuple[int, ...]
    hidden_fns: tuple[TransferFn, ...]
    output_size: int
    output_fn: TransferFn = field(default=TransferFn.LINEAR)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "hidden_fns", tuple(self.hidden_fns))
        if self.input_size < 1 or self.output_size < 1:
            raise ValueError("input and output sizes must be positive")
        if not 1 <= len(self.hidden_sizes) <= MAX_HIDDEN_LAYERS:
            raise ValueError(f"1 to {MAX_HIDDEN_LAYERS} hidden layers required, got {len(self.hidden_sizes)}")
        if len(self.hidden_fns) != len(self.hidden_sizes):
            raise ValueError("hidden_fns and hidden_sizes differ in length")
        if any(not 1 <= h <= MAX_HIDDEN_UNITS for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must lie in [1, {MAX_HIDDEN_UNITS}]: {self.hidden_sizes}")
        if self.output_fn is not TransferFn.LINEAR:
            raise ValueError("output layer must be linear")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_size, *self.hidden_sizes, self.output_size)

    @property
    def layer_fns(self) -> tuple[TransferFn, ...]:
        return (*self.hidden_fns, self.output_fn)

    @property
    def weight_shapes(self) -> list[tuple[int, int]]:
        sizes = self.layer_sizes
        return [(sizes[i + 1], sizes[i] + 1) for i in range(len(sizes) - 1)]


@dataclass
class Network:
    arch: Architecture
    weights: list[np.ndarray]

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        shapes = self.arch.weight_shapes
        if len(self.weights) != len(shapes):
            raise ValueError(f"expected {len(shapes)} weight matrices, got {len(self.weights)}")
        for w, shape in zip(self.weights, shapes):
            if w.shape != shape:
                raise ValueError(f"weight matrix shape {w.shape} != expected {shape}")

    @classmethod
    def random(cls, arch: Architecture, rng: np.random.Generator, scale: float = 0.05) -> "Network":
        return cls(arch, [rng.uniform(-scale, scale, size=s) for s in arch.weight_shapes])

    def copy(self) -> "Network":
        return Network(self.arch, [w.copy() for w in self.weights])

    @property
    def num_weights(self) -> int:
        return sum(w.size for w in self.weights)

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])

    def with_flat(self, vector: np.ndarray) -> "Network":
        out, start = [], 0
        for shape in self.arch.weight_shapes:
            size = shape[0] * shape[1]
            out.append(np.asarray(vector[start:start + size], dtype=float).reshape(shape))
            start += size
        return Network(self.arch, out)


def forward_layers(net: Network, inputs: np.ndarray) -> list[np.ndarray]:
    """Return the activations of every layer for a batch, input layer first."""
    a = np.asarray(inputs, dtype=float)
    if a.ndim != 2 or a.shape[1] != net.arch.input_size:
        raise ValueError(f"input shape {a.shape} does not match input size {net.arch.input_size}")
    acts = [a]
    for w, fn in zip(net.weights, net.arch.layer_fns):
        a = apply_transfer(fn, a @ w[:, :-1].T + w[:, -1])
        acts.append(a)
    return acts


def forward(net: Network, inputs) -> np.ndarray:
    """Network output for one pattern (1-D input) or a batch (2-D input)."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != net.arch.input_size:
            raise ValueError(f"input length {x.shape[0]} does not match input size {net.arch.input_size}")
        return forward_layers(net, x[None, :])[-1][0]
    return forward_layers(net, x)[-1]


def nmse(outputs, targets) -> float:
    """Normalized mean squared error: 100/(N*P) times the summed squared residuals."""
    o = np.atleast_2d(np.asarray(outputs, dtype=float))
    d = np.atleast_2d(np.asarray(targets, dtype=float))
    if o.shape != d.shape:
        raise ValueError(f"shape mismatch: outputs {o.shape} vs targets {d.shape}")
    if o.size == 0:
        raise ValueError("empty outputs")
    return float(100.0 / o.size * np.sum((d - o) ** 2))


def winner_takes_all(output) -> int:
    """Index of the largest output; ties go to the lowest index."""
    v = np.asarray(output, dtype=float)
    if v.size == 0:
        raise ValueError("empty output vector")
    return int(np.argmax(v))


def classify(net: Network, inputs: np.ndarray) -> np.ndarray:
    return np.argmax(forward_layers(net, inputs)[-1], axis=1)


def count_nodes(arch: Architecture) -> tuple[int, int]:
    """Node count ``c`` of ``arch`` and the capacity ``c_total`` of the largest allowed net."""
    c = arch.input_size + sum(arch.hidden_sizes) + arch.output_size
    c_total = arch.input_size + MAX_HIDDEN_LAYERS * MAX_HIDDEN_UNITS + arch.output_size
    return c, c_total
