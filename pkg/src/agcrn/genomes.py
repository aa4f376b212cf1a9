"""Genomes for the three search layers and their real-coded operators.

* ``WeightGenome``: initial weights for a fixed architecture.
* ``ArchGenome``: hidden layer sizes and transfer functions.
* ``RuleGenome``: parameters of one training algorithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlp import MAX_HIDDEN_LAYERS, MAX_HIDDEN_UNITS, Architecture, Network, TransferFn
from .trainers import PARAM_RANGES, TrainAlgo, TrainParams

INITIAL_WEIGHT_RANGE = (-0.05, 0.05)
TRANSFER_FNS = (TransferFn.LINEAR, TransferFn.TANH, TransferFn.LOGSIG)


@dataclass(frozen=True)
class MutationRanges:
    fx: tuple[float, float] = (-0.5, 0.5)
    arqval: tuple[int, int] = (-2, 5)
    sparse_density: float = 0.40
    rate_delta: float = 0.40
    rate_prob: float = 0.5


@dataclass
class WeightGenome:
    arch: Architecture
    weights: list[np.ndarray]

    def __post_init__(self):
        Network(self.arch, self.weights)  # shape validation

    @classmethod
    def random(cls, arch: Architecture, rng: np.random.Generator) -> "WeightGenome":
        lo, hi = INITIAL_WEIGHT_RANGE
        return cls(arch, [rng.uniform(lo, hi, size=s) for s in arch.weight_shapes])

    def network(self) -> Network:
        return Network(self.arch, [w.copy() for w in self.weights])


@dataclass(frozen=True)
class ArchGenome:
    dims: tuple[int, ...]
    fns: tuple[TransferFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "fns", tuple(self.fns))
        if not 1 <= len(self.dims) <= MAX_HIDDEN_LAYERS:
            raise ValueError(f"num_hidden must lie in [1, {MAX_HIDDEN_LAYERS}], got {len(self.dims)}")
        if len(self.fns) != len(self.dims):
            raise ValueError("dims and fns differ in length")
        if any(not 1 <= d <= MAX_HIDDEN_UNITS for d in self.dims):
            raise ValueError(f"dims must lie in [1, {MAX_HIDDEN_UNITS}]: {self.dims}")

    @property
    def num_hidden(self) -> int:
        return len(self.dims)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ArchGenome":
        n = int(rng.integers(1, MAX_HIDDEN_LAYERS + 1))
        return cls(*_random_layers(n, rng))

    def architecture(self, input_size: int, output_size: int) -> Architecture:
        return Architecture(input_size, self.dims, self.fns, output_size)


@dataclass(frozen=True)
class RuleGenome:
    params: TrainParams

    @property
    def algo(self) -> TrainAlgo:
        return self.params.algo

    @classmethod
    def random(cls, algo: TrainAlgo, rng: np.random.Generator) -> "RuleGenome":
        values = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in PARAM_RANGES[algo].items()}
        return cls(TrainParams(algo, values))


def _random_layers(n: int, rng) -> tuple[list[int], list[TransferFn]]:
    dims = [int(rng.integers(1, MAX_HIDDEN_UNITS + 1)) for _ in range(n)]
    fns = [TRANSFER_FNS[int(rng.integers(len(TRANSFER_FNS)))] for _ in range(n)]
    return dims, fns


def _split_rows(n: int, a_on_top: bool) -> int:
    # a always keeps the larger half of an odd row count
    return math.ceil(n / 2) if a_on_top else n // 2


def ppi_crossover(a: WeightGenome, b: WeightGenome, rng: np.random.Generator) -> WeightGenome:
    """Join row halves of the parents' matrices.

    One coin per child picks ``[top(a); bottom(b)]`` or ``[top(b); bottom(a)]``.
    Rows are destination neurons, so each neuron keeps all of its incoming
    weights from a single parent.
    """
    if a.arch != b.arch:
        raise ValueError("parents have different architectures")
    a_on_top = bool(rng.random() < 0.5)
    child = []
    for wa, wb in zip(a.weights, b.weights):
        cut = _split_rows(wa.shape[0], a_on_top)
        top, bottom = (wa, wb) if a_on_top else (wb, wa)
        child.append(np.vstack([top[:cut], bottom[cut:]]))
    return WeightGenome(a.arch, child)


def sparse_perturbation(shape, ranges: MutationRanges, rng: np.random.Generator) -> np.ndarray:
    size = int(np.prod(shape))
    count = int(round(ranges.sparse_density * size))
    out = np.zeros(size)
    idx = rng.choice(size, size=count, replace=False)
    out[idx] = rng.uniform(*ranges.fx, size=count)
    return out.reshape(shape)


def ppi_mutate(g: WeightGenome, ranges: MutationRanges, rng: np.random.Generator) -> WeightGenome:
    return WeightGenome(g.arch, [w + sparse_perturbation(w.shape, ranges, rng) for w in g.weights])


def paf_crossover(a: ArchGenome, b: ArchGenome, probs: float = 0.5,
                  rng: np.random.Generator | None = None) -> ArchGenome:
    """Child depth is the parents' mean depth rounded up (or down with
    probability ``probs``); each layer is drawn from the pooled parent layers."""
    rng = rng if rng is not None else np.random.default_rng()
    total = a.num_hidden + b.num_hidden
    n = math.ceil(total / 2) if rng.random() > probs else total // 2
    n = min(max(n, 1), MAX_HIDDEN_LAYERS)
    pool = list(zip(a.dims, a.fns)) + list(zip(b.dims, b.fns))
    picks = [pool[int(rng.integers(len(pool)))] for _ in range(n)]
    return ArchGenome(tuple(d for d, _ in picks), tuple(f for _, f in picks))


def _clamp_dim(d: int) -> int:
    return min(max(int(d), 1), MAX_HIDDEN_UNITS)


def paf_mutate(g: ArchGenome, ranges: MutationRanges, rng: np.random.Generator,
               u: float | None = None) -> ArchGenome:
    """Grow, shrink or jitter the hidden layers depending on one draw ``u``.

    ========  ===========  ===========  =================
    layers    u >= 0.6     u >= 0.5     otherwise
    ========  ===========  ===========  =================
    1         grow to 3    grow to 2    add arqval offsets
    2         grow to 3    shrink to 1  add arqval offsets
    3         shrink to 2  shrink to 1  add arqval offsets
    ========  ===========  ===========  =================
    """
    if u is None:
        u = float(rng.random())
    n = g.num_hidden
    if u >= 0.6:
        target = 2 if n == 3 else 3
    elif u >= 0.5:
        target = {1: 2, 2: 1, 3: 1}[n]
    else:
        lo, hi = ranges.arqval
        offsets = rng.integers(lo, hi + 1, size=n)
        return ArchGenome(tuple(_clamp_dim(d + o) for d, o in zip(g.dims, offsets)), g.fns)
    if target <= n:
        return ArchGenome(g.dims[:target], g.fns[:target])
    dims, fns = _random_layers(target - n, rng)
    return ArchGenome(g.dims + tuple(dims), g.fns + tuple(fns))


def _clamp_params(algo: TrainAlgo, values: dict[str, float]) -> dict[str, float]:
    return {k: float(min(max(v, PARAM_RANGES[algo][k][0]), PARAM_RANGES[algo][k][1]))
            for k, v in values.items()}


def pra_crossover(a: RuleGenome, b: RuleGenome, rng: np.random.Generator) -> RuleGenome:
    if a.algo != b.algo:
        raise ValueError(f"cannot cross {a.algo.name} with {b.algo.name}")
    values = {}
    for name, va in a.params.values.items():
        vb = b.params.values[name]
        lo, hi = min(va, vb), max(va, vb)
        values[name] = float(rng.uniform(lo, hi)) if hi > lo else va
    return RuleGenome(TrainParams(a.algo, _clamp_params(a.algo, values), a.params.epochs))


def pra_mutate(g: RuleGenome, ranges: MutationRanges, rng: np.random.Generator) -> RuleGenome:
    values = {}
    for name, v in g.params.values.items():
        if rng.random() < ranges.rate_prob:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            v = v * (1.0 + sign * ranges.rate_delta)
        values[name] = v
    return RuleGenome(TrainParams(g.algo, _clamp_params(g.algo, values), g.params.epochs))
