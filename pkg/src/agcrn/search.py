"""Three-level nested cellular search over rules, architectures and weights.

For one training algorithm the search keeps

* a rule population (learning parameters),
* an architecture population, each member owning
* a weight population of initial weights for that member's architecture.

Each rule generation runs ``beafa`` architecture generations; each of those
first runs ``bep`` weight generations for every architecture member. The
architecture and weight levels train with the currently best rule, and a
rule is scored by the best architecture fitness it achieves.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .cga import CgaConfig, Grid, Member, Operators, generation_step, make_grid, stream
from .data import DataError, Dataset
from .fitness import (FAILED, FitnessWeights, PPIResult, classification_error, evaluate_paf,
                      evaluate_ppi, score_network)
from .genomes import (ArchGenome, MutationRanges, RuleGenome, WeightGenome, paf_crossover,
                      paf_mutate, ppi_crossover, ppi_mutate, pra_crossover, pra_mutate)
from .mlp import Network
from .trainers import TrainAlgo

log = logging.getLogger(__name__)

ALGOS = (TrainAlgo.BP, TrainAlgo.LM, TrainAlgo.QNA, TrainAlgo.SCG)


@dataclass(frozen=True)
class SearchConfig:
    pra_size: int = 4
    paf_size: int = 9
    ppi_size: int = 9
    bera: int = 18
    beafa: int = 5
    bep: int = 3
    cga: CgaConfig = CgaConfig()
    fitness: FitnessWeights = FitnessWeights()
    ranges: MutationRanges = MutationRanges()
    probs: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("pra_size", "paf_size", "ppi_size", "bera", "beafa", "bep"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass
class ArchState:
    """Payload of an architecture member: its weight population and best network."""
    ppi: Grid
    best: Member  # weight member whose trained network gives the member's fitness


@dataclass
class Trace:
    level: str
    bera: int
    beafa: int
    cell: int
    generation: int
    best: float
    mean: float
    replacements: int
    failures: int


@dataclass
class SearchResult:
    algo: TrainAlgo
    rule: RuleGenome
    arch: ArchGenome
    network: Network
    train_nmse: float
    i_fit: float
    train_error: float
    val_error: float
    steps: dict[str, int]
    traces: list[Trace] = field(default_factory=list)
    ppi_runs: list[list[float]] = field(default_factory=list)

    @property
    def hidden_nodes(self) -> int:
        return sum(self.arch.dims)


class _Run:
    def __init__(self, cfg: SearchConfig, algo: TrainAlgo, train: Dataset, val: Dataset | None,
                 seed_path: tuple[int, ...], mapper: Callable):
        self.cfg, self.algo, self.train, self.val = cfg, algo, train, val
        self.base = seed_path
        self.mapper = mapper
        self.n_in, self.n_out = train.n_attributes, train.n_classes
        self.steps = {"pra": 0, "paf": 0, "ppi": 0}
        self.traces: list[Trace] = []
        self.ppi_runs: list[list[float]] = []
        self.rule: RuleGenome | None = None

    # weight level
    def _ppi_evaluate(self, rule: RuleGenome, genome: WeightGenome, rng=None):
        result = evaluate_ppi(genome, rule, self.train)
        return result.fitness, result

    def new_ppi(self, arch: ArchGenome, rule: RuleGenome, rng: np.random.Generator) -> Grid:
        shape = arch.architecture(self.n_in, self.n_out)
        genomes = [WeightGenome.random(shape, rng) for _ in range(self.cfg.ppi_size)]
        members = [Member(g, *self._ppi_evaluate(rule, g)) for g in genomes]
        return make_grid(members)

    def _arch_member(self, arch: ArchGenome, ppi: Grid) -> Member:
        best = ppi.best()
        fit = evaluate_paf(arch, best.payload.rule, best.payload, self.train, self.cfg.fitness)
        return Member(arch, fit, ArchState(ppi, best))

    # architecture level
    def _paf_evaluate(self, arch: ArchGenome, rng: np.random.Generator):
        member = self._arch_member(arch, self.new_ppi(arch, self.rule, rng))
        return member.fitness, member.payload

    def _evolve_ppi(self, member: Member, bera: int, beafa: int, cell: int):
        state: ArchState = member.payload
        ops = Operators(ppi_crossover, lambda g, rng: ppi_mutate(g, self.cfg.ranges, rng),
                        partial(self._ppi_evaluate, self.rule))
        grid = state.ppi
        history = [grid.best().fitness]
        for gen in range(self.cfg.bep):
            step = generation_step(grid, ops, self.cfg.cga, (*self.base, 3, bera, beafa, cell), gen,
                                   self.mapper)
            grid = step.grid
            self.steps["ppi"] += 1
            self._trace("ppi", bera, beafa, cell, step)
            history.append(grid.best().fitness)
        self.ppi_runs.append(history)
        state.ppi = grid
        best = grid.best()
        if best is not state.best and not best.payload.failed:
            fit = evaluate_paf(member.genome, best.payload.rule, best.payload, self.train, self.cfg.fitness)
            if fit < member.fitness:
                member.fitness, state.best = fit, best

    # rule level
    def _pra_evaluate(self, paf: Grid, rule: RuleGenome, rng=None):
        scores = []
        for member in paf.cells:
            state: ArchState = member.payload
            result = evaluate_ppi(state.best.genome, rule, self.train)
            scores.append(FAILED if result.failed else
                          score_network(result.network, self.train, self.cfg.fitness))
        return min(scores), None

    def _trace(self, level, bera, beafa, cell, step):
        s = step.stats
        self.traces.append(Trace(level, bera, beafa, cell, s.generation, s.best, s.mean,
                                 s.replacements, s.failures))

    def execute(self) -> SearchResult:
        cfg = self.cfg
        rng = stream(self.base, 0)
        rules = [RuleGenome.random(self.algo, rng) for _ in range(cfg.pra_size)]
        self.rule = rules[0]
        archs = [ArchGenome.random(rng) for _ in range(cfg.paf_size)]
        paf = make_grid([self._arch_member(a, self.new_ppi(a, self.rule, rng)) for a in archs])
        pra = make_grid([Member(r, self._pra_evaluate(paf, r)[0]) for r in rules])
        self.rule = pra.best().genome

        paf_ops = Operators(lambda a, b, rng: paf_crossover(a, b, cfg.probs, rng),
                            lambda g, rng: paf_mutate(g, cfg.ranges, rng),
                            self._paf_evaluate)
        for bera in range(cfg.bera):
            for beafa in range(cfg.beafa):
                for cell, member in enumerate(paf.cells):
                    self._evolve_ppi(member, bera, beafa, cell)
                step = generation_step(paf, paf_ops, cfg.cga, (*self.base, 2, bera), beafa, self.mapper)
                paf = step.grid
                self.steps["paf"] += 1
                self._trace("paf", bera, beafa, -1, step)
            active = pra.best()
            active.fitness = min(active.fitness, paf.best().fitness)
            pra_ops = Operators(pra_crossover, lambda g, rng: pra_mutate(g, cfg.ranges, rng),
                                partial(self._pra_evaluate, paf))
            step = generation_step(make_grid(pra.cells), pra_ops, cfg.cga, (*self.base, 1), bera, self.mapper)
            pra = step.grid
            self.steps["pra"] += 1
            self._trace("pra", bera, -1, -1, step)
            self.rule = pra.best().genome
            log.debug("%s generation %d: rule fitness %.4f, arch fitness %.4f", self.algo.name, bera,
                      pra.best().fitness, paf.best().fitness)
        return self._result(paf)

    def _result(self, paf: Grid) -> SearchResult:
        best = paf.best()
        state: ArchState = best.payload
        ppi_result: PPIResult = state.best.payload
        net = ppi_result.network
        if net is None:
            raise RuntimeError(f"{self.algo.name}: every training failed")
        val_err = classification_error(net, self.val) if self.val is not None and len(self.val) else math.nan
        return SearchResult(self.algo, ppi_result.rule, best.genome, net, ppi_result.fitness, best.fitness,
                            classification_error(net, self.train), val_err, dict(self.steps),
                            self.traces, self.ppi_runs)


def algo_seed(seed: int, algo: TrainAlgo) -> tuple[int, int]:
    return (int(seed), ALGOS.index(algo))


def run(cfg: SearchConfig, algo: TrainAlgo, train_set: Dataset, val_set: Dataset | None = None,
        mapper: Callable = map) -> SearchResult:
    """Search for a compact classifier trained with ``algo``."""
    counts = np.bincount(train_set.labels, minlength=train_set.n_classes)
    if len(train_set) < train_set.n_classes or np.any(counts == 0):
        raise DataError(f"training set needs one pattern per class, got counts {counts.tolist()}")
    return _Run(cfg, algo, train_set, val_set, algo_seed(cfg.seed, algo), mapper).execute()


def search_all(cfg: SearchConfig, train_set: Dataset, val_set: Dataset | None = None,
               algos=ALGOS, mapper: Callable = map) -> list[SearchResult]:
    """One independent search per algorithm, returned in ``algos`` order."""
    return [run(cfg, algo, train_set, val_set, mapper) for algo in algos]
