"""Fitness measures for the three populations. Lower is better everywhere."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .genomes import ArchGenome, RuleGenome, WeightGenome
from .mlp import MAX_HIDDEN_LAYERS, MAX_HIDDEN_UNITS, Architecture, Network, TransferFn, count_nodes, forward_layers, nmse
from .trainers import TrainReport, _arrays, train

FAILED = math.inf


@dataclass(frozen=True)
class FitnessWeights:
    alpha: float = 1.0
    beta: float = 0.90
    gamma: float = 0.90
    delta: float = 0.20


@dataclass(frozen=True)
class FnWeights:
    linear: float = 0.2
    tanh: float = 0.4
    logsig: float = 0.7

    def __getitem__(self, fn: TransferFn) -> float:
        return {TransferFn.LINEAR: self.linear, TransferFn.TANH: self.tanh,
                TransferFn.LOGSIG: self.logsig}[fn]


def i_acc(correct: int, total: int) -> float:
    """Percentage of misclassified patterns."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= correct <= total:
        raise ValueError(f"correct={correct} outside [0, {total}]")
    return 100.0 * (1.0 - correct / total)


def i_comp(c: int, c_total: int) -> float:
    """Node count relative to the largest allowed network.

    ``c_total`` is input + 36 + output, so a legal net has at least
    ``c_total - 35`` nodes (a single hidden unit).
    """
    lowest = c_total - MAX_HIDDEN_LAYERS * MAX_HIDDEN_UNITS + 1
    if lowest < 3:
        raise ValueError(f"c_total={c_total} leaves no room for input and output nodes")
    if not lowest <= c <= c_total:
        raise ValueError(f"c={c} outside [{lowest}, {c_total}]")
    return c / c_total


def i_f(fns: Sequence[TransferFn], weights: FnWeights = FnWeights()) -> float:
    return float(sum(weights[fn] for fn in fns))


def i_fit(acc: float, err: float, comp: float, f: float, w: FitnessWeights = FitnessWeights()) -> float:
    return w.alpha * acc + w.beta * err + w.gamma * comp + w.delta * f


@dataclass
class PPIResult:
    """Outcome of training one weight genome."""
    fitness: float
    report: TrainReport | None
    rule: RuleGenome

    @property
    def network(self) -> Network | None:
        return None if self.report is None else self.report.trained

    @property
    def failed(self) -> bool:
        return self.report is None or not math.isfinite(self.fitness)


def evaluate_ppi(g: WeightGenome, rule: RuleGenome, train_set) -> PPIResult:
    """Train ``g`` with ``rule`` and score it by its training NMSE."""
    try:
        report = train(g.network(), rule.params, train_set)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError):
        return PPIResult(FAILED, None, rule)
    if not math.isfinite(report.train_nmse):
        return PPIResult(FAILED, None, rule)
    return PPIResult(report.train_nmse, report, rule)


def correct_count(net: Network, data) -> int:
    x, d = _arrays(data)
    predicted = np.argmax(forward_layers(net, x)[-1], axis=1)
    return int(np.sum(predicted == np.argmax(d, axis=1)))


def classification_error(net: Network, data) -> float:
    x, _ = _arrays(data)
    return i_acc(correct_count(net, data), x.shape[0])


def score_network(net: Network, data, weights: FitnessWeights = FitnessWeights(),
                  fn_weights: FnWeights = FnWeights()) -> float:
    """Composite architecture fitness of a trained network on ``data``."""
    x, d = _arrays(data)
    arch: Architecture = net.arch
    acc = i_acc(correct_count(net, (x, d)), x.shape[0])
    err = nmse(forward_layers(net, x)[-1], d)
    comp = i_comp(*count_nodes(arch))
    return i_fit(acc, err, comp, i_f(arch.hidden_fns, fn_weights), weights)


def evaluate_paf(g: ArchGenome, rule: RuleGenome, ppi_result: PPIResult, train_set,
                 weights: FitnessWeights = FitnessWeights()) -> float:
    """Composite fitness of ``g`` using the best trained network of its weight search."""
    if ppi_result.failed:
        return FAILED
    net = ppi_result.network
    if tuple(net.arch.hidden_sizes) != g.dims or tuple(net.arch.hidden_fns) != g.fns:
        raise ValueError("trained network does not match the architecture genome")
    return score_network(net, train_set, weights)


def evaluate_pra(g: RuleGenome, paf_fitnesses: Sequence[float]) -> float:
    """A rule is as good as the best architecture found under it."""
    if len(paf_fitnesses) == 0:
        raise ValueError("empty architecture population")
    return float(min(paf_fitnesses))
