import itertools
import math

import numpy as np
import pytest

from agcrn.data import load_dataset, prepare, SplitSpec
from agcrn.fitness import (FitnessWeights, evaluate_paf, evaluate_ppi, evaluate_pra, i_acc, i_comp,
                           i_f, i_fit, score_network)
from agcrn.genomes import ArchGenome, RuleGenome, WeightGenome
from agcrn.mlp import Architecture, Network, TransferFn
from agcrn.trainers import TrainAlgo, TrainParams

L, T, S = TransferFn.LINEAR, TransferFn.TANH, TransferFn.LOGSIG


@pytest.mark.parametrize("correct,total,expected", [(100, 100, 0.0), (0, 50, 100.0), (75, 100, 25.0)])
def test_i_acc(correct, total, expected):
    assert i_acc(correct, total) == expected


@pytest.mark.parametrize("args", [(5, 0), (-1, 10), (11, 10)])
def test_i_acc_rejects(args):
    with pytest.raises(ValueError):
        i_acc(*args)


def test_i_comp():
    assert i_comp(47, 47) == 1.0
    assert i_comp(15, 47) == 15 / 47
    assert round(i_comp(15, 47), 4) == 0.3191
    for bad in [(1, 47), (48, 47), (11, 47)]:
        with pytest.raises(ValueError):
            i_comp(*bad)


def test_i_f():
    assert i_f([S]) == 0.7
    assert i_f([L, T]) == pytest.approx(0.6)
    assert i_f([L, L, L]) == pytest.approx(0.6)


def test_i_fit_examples():
    assert i_fit(0, 0, 0, 0) == 0
    assert i_fit(25, 10, 0.5, 0.4) == pytest.approx(34.53, abs=1e-12)


def test_i_fit_monotone_in_each_component():
    base = [10.0, 5.0, 0.4, 0.6]
    for k, bump in itertools.product(range(4), [1e-9, 0.1, 50.0]):
        raised = list(base)
        raised[k] += bump
        assert i_fit(*raised) >= i_fit(*base)


def constant_fixture():
    x = np.random.default_rng(0).uniform(size=(10, 2))
    return x, np.tile([0.0, 1.0], (10, 1))


def zero_weight_genome(n_in, n_out, bias_out):
    arch = Architecture(n_in, (1,), (L,), n_out)
    out = np.zeros(arch.weight_shapes[1])
    out[:, -1] = bias_out
    return WeightGenome(arch, [np.zeros(arch.weight_shapes[0]), out])


def test_ppi_fitness_zero_at_constant_perfect_fit():
    x, d = constant_fixture()
    rule = RuleGenome(TrainParams(TrainAlgo.BP, {"learning_rate": 0.1, "momentum": 0.1}))
    result = evaluate_ppi(zero_weight_genome(2, 2, [0.0, 1.0]), rule, (x, d))
    assert result.fitness == 0.0 and not result.failed


def test_ppi_fitness_non_negative():
    rng = np.random.default_rng(1)
    x, d = rng.uniform(size=(20, 3)), np.eye(2)[rng.integers(0, 2, 20)]
    for algo in TrainAlgo:
        for _ in range(5):
            g = WeightGenome.random(ArchGenome.random(rng).architecture(3, 2), rng)
            assert evaluate_ppi(g, RuleGenome.random(algo, rng), (x, d)).fitness >= 0.0


def test_ppi_fitness_on_linear_problem_with_lm():
    x = np.linspace(0, 1, 15)[:, None]
    d = 2.0 * x + 1.0
    rng = np.random.default_rng(0)
    g = WeightGenome.random(Architecture(1, (1,), (L,), 1), rng)
    rule = RuleGenome(TrainParams(TrainAlgo.LM, {"learning_rate": 0.01}))
    assert evaluate_ppi(g, rule, (x, d)).fitness < 1e-6


def test_paf_fitness_of_perfect_minimal_net():
    x, d = constant_fixture()
    rule = RuleGenome(TrainParams(TrainAlgo.BP, {"learning_rate": 0.1, "momentum": 0.1}))
    ppi = evaluate_ppi(zero_weight_genome(2, 2, [0.0, 1.0]), rule, (x, d))
    w = FitnessWeights()
    got = evaluate_paf(ArchGenome((1,), (L,)), rule, ppi, (x, d), w)
    assert got == pytest.approx(w.gamma * 5 / 40 + w.delta * 0.2, abs=1e-15)


def test_paf_prefers_smaller_net_at_equal_accuracy():
    x, d = constant_fixture()
    small = Network(Architecture(2, (1,), (L,), 2), [np.zeros((1, 3)), np.array([[0.0, 0.0], [0.0, 1.0]])])
    big = Network(Architecture(2, (5,), (L,), 2), [np.zeros((5, 3)), np.hstack([np.zeros((2, 5)), [[0.0], [1.0]]])])
    assert score_network(small, (x, d)) < score_network(big, (x, d))


def test_paf_rejects_mismatched_network():
    x, d = constant_fixture()
    rule = RuleGenome(TrainParams(TrainAlgo.BP, {"learning_rate": 0.1, "momentum": 0.1}))
    ppi = evaluate_ppi(zero_weight_genome(2, 2, [0.0, 1.0]), rule, (x, d))
    with pytest.raises(ValueError):
        evaluate_paf(ArchGenome((2,), (L,)), rule, ppi, (x, d))


def test_paf_fitness_bounded_on_cancer():
    train, _, _ = prepare(load_dataset("cancer"), SplitSpec(seed=3))
    rng = np.random.default_rng(3)
    w = FitnessWeights()
    bound = 100 * (w.alpha + w.beta) + w.gamma + 3 * 0.7 * w.delta
    for algo in TrainAlgo:
        arch = ArchGenome.random(rng)
        rule = RuleGenome.random(algo, rng)
        ppi = evaluate_ppi(WeightGenome.random(arch.architecture(9, 2), rng), rule, train)
        fit = evaluate_paf(arch, rule, ppi, train)
        assert math.isfinite(fit) and 0 <= fit <= bound


def test_pra_fitness():
    rule = RuleGenome(TrainParams(TrainAlgo.LM, {"learning_rate": 0.01}))
    assert evaluate_pra(rule, [12.0, 7.5, 9.1]) == 7.5
    assert evaluate_pra(rule, [4.2]) == 4.2
    values = np.random.default_rng(0).uniform(0, 50, size=9).tolist()
    assert evaluate_pra(rule, values) <= np.mean(values)
    with pytest.raises(ValueError):
        evaluate_pra(rule, [])
