import math

import numpy as np
import pytest

from agcrn.cga import (CgaConfig, Grid, Member, Operators, Topology, generation_step, grid_shape,
                       make_grid, neighbors, select_survivors, stream, tournament)

import oracles


def sphere_ops(dim=3):
    return Operators(
        crossover=lambda a, b, rng: np.where(rng.random(a.shape) < 0.5, a, b),
        mutate=lambda g, rng: g + rng.normal(scale=0.3, size=g.shape),
        evaluate=lambda g, rng: (float(np.sum(g * g)), None),
    )


def sphere_grid(size, rng, dim=3):
    genomes = [rng.uniform(-2, 2, size=dim) for _ in range(size)]
    return make_grid([Member(g, float(np.sum(g * g))) for g in genomes])


@pytest.mark.parametrize("p", range(1, 50))
def test_grid_shape_is_squarest(p):
    assert grid_shape(p) == oracles.squarest(p)


def test_grid_shape_examples():
    assert grid_shape(9) == (3, 3)
    assert grid_shape(4) == (2, 2)
    g = make_grid([Member("x", 1.0)])
    assert (g.rows, g.cols) == (1, 1) and g.at((0, 0)).genome == "x"


def test_make_grid_sorts_row_major():
    g = make_grid([Member(i, f) for i, f in enumerate([5.0, 1.0, 3.0, 2.0])])
    assert [m.fitness for m in g.cells] == [1.0, 2.0, 3.0, 5.0]
    assert g.at((1, 0)).fitness == 3.0


def test_neighbor_examples():
    g3 = make_grid([Member(i, float(i)) for i in range(9)])
    assert set(neighbors(g3, (0, 0), Topology.VON_NEUMANN)) == {(2, 0), (1, 0), (0, 2), (0, 1)}
    assert set(neighbors(g3, (1, 1), Topology.MOORE)) == {(r, c) for r in range(3) for c in range(3)} - {(1, 1)}
    g2 = make_grid([Member(i, float(i)) for i in range(4)])
    got = neighbors(g2, (0, 0), Topology.MOORE)
    assert sorted(got) == [(0, 1), (1, 0), (1, 1)]


@pytest.mark.parametrize("topo,offsets", [(Topology.MOORE, oracles.MOORE),
                                          (Topology.VON_NEUMANN, oracles.VON_NEUMANN)])
def test_neighbors_match_torus_oracle(topo, offsets):
    for size in (2, 3, 4, 6, 9, 12, 25):
        g = make_grid([Member(i, float(i)) for i in range(size)])
        for idx in range(size):
            pos = g.position(idx)
            got = neighbors(g, pos, topo)
            assert len(got) == len(set(got))
            assert set(got) == oracles.torus_neighbors(g.rows, g.cols, pos, offsets)


def test_neighbors_out_of_grid():
    g = make_grid([Member(i, float(i)) for i in range(4)])
    with pytest.raises(IndexError):
        neighbors(g, (2, 0))


def test_tournament_examples():
    rng = np.random.default_rng(0)
    assert all(tournament([("only", 9.0)], p, rng) == "only" for p in (0.0, 0.3, 1.0))
    cands = [(0, 3.0), (1, 1.0), (2, 2.0)]
    assert all(tournament(cands, 1.0, rng) == 1 for _ in range(200))
    with pytest.raises(ValueError):
        tournament([], 0.5, rng)


def test_tournament_frequency_matches_mixture():
    rng = np.random.default_rng(12345)
    cands = [(0, 4.0), (1, 2.0), (2, 0.5), (3, 3.0)]
    wins = sum(tournament(cands, 0.5, rng) == 2 for _ in range(10_000))
    assert abs(wins / 10_000 - (0.5 + 0.5 / 4)) < 0.02


def test_worse_offspring_never_replace():
    rng = np.random.default_rng(1)
    grid = sphere_grid(9, rng)
    ops = Operators(lambda a, b, r: a, lambda g, r: g, lambda g, r: (1e9, None))
    step = generation_step(grid, ops, CgaConfig(), (1,), 0)
    assert step.stats.replacements == 0
    assert sorted(m.fitness for m in step.grid.cells) == sorted(m.fitness for m in grid.cells)
    assert step.grid.best().fitness == grid.best().fitness


def test_better_offspring_lands_in_aux_cell():
    rng = np.random.default_rng(2)
    grid = sphere_grid(9, rng)
    ops = Operators(lambda a, b, r: np.zeros_like(a), lambda g, r: g, lambda g, r: (-1.0, "new"))
    step = generation_step(grid, ops, CgaConfig(offspring=1), (2,), 0)
    assert len(step.accepted) == 1
    pos, member = step.accepted[0]
    assert step.aux.at(pos) is member and member.payload == "new"
    assert step.grid.best().fitness == -1.0


def test_failed_evaluations_are_counted_not_raised():
    rng = np.random.default_rng(3)
    grid = sphere_grid(4, rng)

    def boom(g, r):
        raise ValueError("diverged")

    step = generation_step(grid, Operators(lambda a, b, r: a, lambda g, r: g, boom), CgaConfig(), 7, 0)
    assert step.stats.failures == step.stats.evaluations == 4
    assert step.grid.size == 4


def test_single_cell_grid_is_unchanged():
    grid = make_grid([Member(np.ones(3), 3.0)])
    step = generation_step(grid, sphere_ops(), CgaConfig(), 0, 0)
    assert step.grid.cells[0].fitness == 3.0 and step.stats.evaluations == 0


def test_survivors_keep_elite():
    rng = np.random.default_rng(0)
    pool = [Member(i, float(f)) for i, f in enumerate(rng.permutation(20))]
    cfg = CgaConfig(elitism=0.1, pressure=0.0)
    for seed in range(50):
        chosen = select_survivors(pool, 10, cfg, np.random.default_rng(seed))
        assert len(chosen) == 10 and len({id(m) for m in chosen}) == 10
        assert {0.0} <= {m.fitness for m in chosen}


@pytest.mark.parametrize("topo", list(Topology))
def test_best_fitness_non_increasing(topo):
    cfg = CgaConfig(topology=topo)
    for seed in range(20):
        grid = sphere_grid(9, np.random.default_rng(seed))
        best = grid.best().fitness
        for gen in range(10):
            grid = generation_step(grid, sphere_ops(), cfg, (seed,), gen).grid
            assert grid.size == 9
            assert grid.best().fitness <= best
            best = grid.best().fitness


def test_generation_step_deterministic_and_mapper_independent():
    grid = sphere_grid(9, np.random.default_rng(5))
    a = generation_step(grid, sphere_ops(), CgaConfig(), (5, 1), 3)
    b = generation_step(grid, sphere_ops(), CgaConfig(), (5, 1), 3,
                        mapper=lambda f, xs: [f(x) for x in reversed(list(xs))][::-1])
    assert [m.fitness for m in a.grid.cells] == [m.fitness for m in b.grid.cells]


def test_streams_are_independent_per_key():
    x = stream((1, 2), 0, 0).random(4)
    assert np.array_equal(x, stream((1, 2), 0, 0).random(4))
    assert not np.array_equal(x, stream((1, 2), 0, 1).random(4))
    assert not np.array_equal(x, stream((1, 3), 0, 0).random(4))


def test_config_validation():
    with pytest.raises(ValueError):
        CgaConfig(pressure=1.5)
    with pytest.raises(ValueError):
        CgaConfig(offspring=0)
    with pytest.raises(ValueError):
        Grid(2, 2, [Member(0, 0.0)])


def test_mean_ignores_failed_members():
    grid = make_grid([Member(0, 1.0), Member(1, math.inf), Member(2, 3.0), Member(3, math.inf)])
    ops = Operators(lambda a, b, r: a, lambda g, r: g, lambda g, r: (1e9, None))
    step = generation_step(grid, ops, CgaConfig(), 0, 0)
    assert step.stats.mean == 2.0
