import numpy as np
import pytest

from agcrn.cga import stream
from agcrn.data import DataError, SplitSpec, load_dataset, prepare
from agcrn.fitness import evaluate_ppi
from agcrn.genomes import ArchGenome, RuleGenome, WeightGenome
from agcrn.search import ALGOS, SearchConfig, algo_seed, run, search_all
from agcrn.trainers import PARAM_RANGES, TrainAlgo

SMALL = SearchConfig(pra_size=2, paf_size=4, ppi_size=4, bera=2, beafa=2, bep=2, seed=5)


@pytest.fixture(scope="module")
def cancer_parts():
    d = load_dataset("cancer")
    d = d.subset(np.arange(0, len(d), 4))
    return prepare(d, SplitSpec(seed=1))


def test_degenerate_search_is_one_training(cancer_parts):
    train, val, _ = cancer_parts
    cfg = SearchConfig(pra_size=1, paf_size=1, ppi_size=1, bera=1, beafa=1, bep=1, seed=3)
    result = run(cfg, TrainAlgo.LM, train, val)

    rng = stream(algo_seed(3, TrainAlgo.LM), 0)
    rule = RuleGenome.random(TrainAlgo.LM, rng)
    arch = ArchGenome.random(rng)
    genome = WeightGenome.random(arch.architecture(train.n_attributes, train.n_classes), rng)
    once = evaluate_ppi(genome, rule, train)
    assert result.arch == arch and result.rule == rule
    assert np.array_equal(result.network.flat(), once.network.flat())
    assert result.train_nmse == once.fitness


def test_step_counts_and_layer_speed(cancer_parts):
    train, val, _ = cancer_parts
    result = run(SMALL, TrainAlgo.SCG, train, val)
    assert result.steps == {"pra": 2, "paf": 4, "ppi": 2 * 2 * 2 * 4}
    assert result.steps["ppi"] > result.steps["paf"] > result.steps["pra"]


def test_ppi_runs_never_get_worse(cancer_parts):
    train, val, _ = cancer_parts
    result = run(SMALL, TrainAlgo.QNA, train, val)
    assert result.ppi_runs
    for history in result.ppi_runs:
        assert all(b <= a for a, b in zip(history, history[1:]))


def test_result_invariants(cancer_parts):
    train, val, _ = cancer_parts
    for result in search_all(SMALL, train, val):
        assert 1 <= result.arch.num_hidden <= 3 and 1 <= result.hidden_nodes <= 36
        for k, (lo, hi) in PARAM_RANGES[result.algo].items():
            assert lo <= result.rule.params[k] <= hi
        assert 0 <= result.train_error <= 100 and 0 <= result.val_error <= 100
        assert result.network.arch.hidden_sizes == result.arch.dims


def test_search_all_order(cancer_parts):
    train, val, _ = cancer_parts
    results = search_all(SMALL, train, val)
    assert [r.algo for r in results] == list(ALGOS)


def test_results_independent_of_algorithm_order(cancer_parts):
    train, val, _ = cancer_parts
    forward = search_all(SMALL, train, val, algos=[TrainAlgo.BP, TrainAlgo.LM])
    backward = search_all(SMALL, train, val, algos=[TrainAlgo.LM, TrainAlgo.BP])
    for a, b in zip(forward, reversed(backward)):
        assert a.algo == b.algo and a.i_fit == b.i_fit
        assert np.array_equal(a.network.flat(), b.network.flat())


def test_seed_changes_result(cancer_parts):
    train, val, _ = cancer_parts
    a = run(SMALL, TrainAlgo.BP, train, val)
    b = run(SearchConfig(**{**SMALL.__dict__, "seed": 6}), TrainAlgo.BP, train, val)
    assert not np.array_equal(a.network.flat(), b.network.flat()) or a.arch != b.arch


def test_missing_class_in_training_set(cancer_parts):
    train, val, _ = cancer_parts
    only_one = train.subset(np.flatnonzero(train.labels == 0))
    with pytest.raises(DataError):
        run(SMALL, TrainAlgo.BP, only_one, val)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(bera=0)
