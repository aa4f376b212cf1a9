"""Cellular genetic algorithm on a toroidal grid.

Individuals live in grid cells and only mate with their neighbours. One
generation follows a synchronous scheme: offspring are written into an
auxiliary copy of the grid, then survivors are chosen from the old
individuals plus the accepted offspring, with a guaranteed elite.

Fitness is always minimized.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np


class Topology(enum.Enum):
    MOORE = "moore"
    VON_NEUMANN = "vonneumann"


_OFFSETS = {
    Topology.MOORE: [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    Topology.VON_NEUMANN: [(-1, 0), (1, 0), (0, -1), (0, 1)],
}


@dataclass(frozen=True)
class CgaConfig:
    topology: Topology = Topology.MOORE
    pressure: float = 0.5
    elitism: float = 0.10
    mutation_rate: float = 0.40
    offspring: int | None = None  # None: one offspring per cell

    def __post_init__(self):
        for name in ("pressure", "elitism", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.offspring is not None and self.offspring < 1:
            raise ValueError("offspring must be at least 1")


@dataclass
class Member:
    genome: Any
    fitness: float
    payload: Any = None


@dataclass
class Grid:
    rows: int
    cols: int
    cells: list[Member]

    def __post_init__(self):
        if self.rows * self.cols != len(self.cells):
            raise ValueError(f"{self.rows}x{self.cols} grid cannot hold {len(self.cells)} cells")

    @property
    def size(self) -> int:
        return len(self.cells)

    def at(self, pos: tuple[int, int]) -> Member:
        r, c = pos
        return self.cells[r * self.cols + c]

    def position(self, index: int) -> tuple[int, int]:
        return divmod(index, self.cols)

    def fitnesses(self) -> np.ndarray:
        return np.array([m.fitness for m in self.cells], dtype=float)

    def best(self) -> Member:
        return self.cells[int(np.argmin(self.fitnesses()))]


def grid_shape(size: int) -> tuple[int, int]:
    """Squarest ``rows x cols`` factorization with ``rows <= cols``."""
    if size < 1:
        raise ValueError("population must not be empty")
    rows = max(r for r in range(1, math.isqrt(size) + 1) if size % r == 0)
    return rows, size // rows


def make_grid(members: Sequence[Member]) -> Grid:
    """Place members row-major in ascending fitness order (stable)."""
    if len(members) == 0:
        raise ValueError("population must not be empty")
    rows, cols = grid_shape(len(members))
    ordered = sorted(members, key=lambda m: m.fitness)
    return Grid(rows, cols, list(ordered))


def neighbors(grid: Grid, pos: tuple[int, int], topo: Topology = Topology.MOORE) -> list[tuple[int, int]]:
    r, c = pos
    if not (0 <= r < grid.rows and 0 <= c < grid.cols):
        raise IndexError(f"{pos} outside {grid.rows}x{grid.cols} grid")
    out = []
    for dr, dc in _OFFSETS[topo]:
        q = ((r + dr) % grid.rows, (c + dc) % grid.cols)
        if q != pos and q not in out:
            out.append(q)
    return out


def tournament(cands: Sequence[tuple[Any, float]], p: float, rng: np.random.Generator):
    """With probability ``p`` return the fittest id, otherwise a uniform pick."""
    if len(cands) == 0:
        raise ValueError("tournament needs at least one candidate")
    if rng.random() < p:
        return min(cands, key=lambda c: c[1])[0]
    return cands[int(rng.integers(len(cands)))][0]


@dataclass
class Operators:
    """Genome operators plus the evaluator.

    ``evaluate(genome, rng)`` returns ``(fitness, payload)``; raising marks
    the offspring as failed.
    """
    crossover: Callable[[Any, Any, np.random.Generator], Any]
    mutate: Callable[[Any, np.random.Generator], Any]
    evaluate: Callable[[Any, np.random.Generator], tuple[float, Any]]


@dataclass
class StepStats:
    generation: int
    best: float
    mean: float
    replacements: int
    failures: int
    evaluations: int


@dataclass
class StepResult:
    grid: Grid
    aux: Grid
    stats: StepStats
    accepted: list[tuple[tuple[int, int], Member]] = field(default_factory=list)


def stream(seed: Sequence[int] | int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under ``seed`` (a path of ints)."""
    entropy = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(e) for e in entropy],
                                                        spawn_key=tuple(int(k) for k in key)))


def _finite_mean(values: Iterable[float]) -> float:
    v = np.array([x for x in values if math.isfinite(x)], dtype=float)
    return float(v.mean()) if v.size else math.inf


def _breed(grid: Grid, ops: Operators, cfg: CgaConfig, rng: np.random.Generator):
    index = int(rng.integers(grid.size))
    pos = grid.position(index)
    mates = [(q, grid.at(q).fitness) for q in neighbors(grid, pos, cfg.topology)]
    mate = tournament(mates, cfg.pressure, rng)
    child = ops.crossover(grid.at(pos).genome, grid.at(mate).genome, rng)
    if rng.random() < cfg.mutation_rate:
        child = ops.mutate(child, rng)
    return pos, child


def generation_step(grid: Grid, ops: Operators, cfg: CgaConfig, seed: Sequence[int] | int,
                    generation: int, mapper: Callable = map) -> StepResult:
    """Run one synchronous generation and return the re-sorted survivor grid.

    Offspring ``k`` draws all its randomness from ``stream(seed, generation, k)``
    so ``mapper`` may evaluate offspring in parallel without changing results.
    """
    size = grid.size
    if size == 1:
        # a lone cell has no neighbourhood to mate with
        stats = StepStats(generation, grid.cells[0].fitness, grid.cells[0].fitness, 0, 0, 0)
        return StepResult(grid, Grid(1, 1, list(grid.cells)), stats)
    n_offspring = cfg.offspring or size
    rngs = [stream(seed, generation, k) for k in range(n_offspring)]
    plans = [_breed(grid, ops, cfg, rng) for rng in rngs]

    def run(job):
        (_, child), rng = job
        try:
            fit, payload = ops.evaluate(child, rng)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            return None
        return None if math.isnan(fit) else (float(fit), payload)

    outcomes = list(mapper(run, zip(plans, rngs)))

    aux = list(grid.cells)
    accepted: list[tuple[tuple[int, int], Member]] = []
    failures = 0
    for (pos, child), outcome in zip(plans, outcomes):
        if outcome is None:
            failures += 1
            continue
        fit, payload = outcome
        index = pos[0] * grid.cols + pos[1]
        if fit < aux[index].fitness:
            member = Member(child, fit, payload)
            aux[index] = member
            accepted.append((pos, member))
    aux_grid = Grid(grid.rows, grid.cols, aux)

    pool = list(grid.cells) + [m for _, m in accepted]
    survivors = select_survivors(pool, size, cfg, stream(seed, generation, n_offspring, 1))
    new_grid = make_grid(survivors)
    fits = new_grid.fitnesses()
    stats = StepStats(generation, float(fits.min()), _finite_mean(fits), len(accepted), failures,
                      n_offspring)
    return StepResult(new_grid, aux_grid, stats, accepted)


def select_survivors(pool: Sequence[Member], size: int, cfg: CgaConfig,
                     rng: np.random.Generator) -> list[Member]:
    """Keep the top ``ceil(elitism * size)`` members, fill the rest by tournament
    draws without replacement."""
    order = sorted(range(len(pool)), key=lambda i: pool[i].fitness)
    n_elite = min(math.ceil(cfg.elitism * size), size)
    chosen = order[:n_elite]
    remaining = order[n_elite:]
    while len(chosen) < size:
        pick = tournament([(i, pool[i].fitness) for i in remaining], cfg.pressure, rng)
        remaining.remove(pick)
        chosen.append(pick)
    return [pool[i] for i in chosen]
