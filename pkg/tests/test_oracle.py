import numpy as np
import pytest

from minep import QuadGame, load_fixture
from minep.iterate import run_mixed
from minep.oracle import (OracleBudgetError, enumerate_equilibria, equilibrium_gaps, lattice_size,
                          verify_equilibrium)

from helpers import integer_game, random_point


def test_verify_on_example_1():
    g = load_fixture("example-1")
    assert verify_equilibrium(g, [0.0, 0.0])
    for p in ([-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]):
        assert not verify_equilibrium(g, p)


def test_example_3_has_no_equilibrium():
    g = load_fixture("example-3", eps=0.05)
    for p in ([0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]):
        assert not verify_equilibrium(g, p)
    assert len(enumerate_equilibria(g)) == 0


def test_gaps_are_nonnegative():
    rng = np.random.default_rng(2)
    g = integer_game(rng, max_points=500)
    for _ in range(10):
        assert np.all(equilibrium_gaps(g, random_point(rng, g)) >= -1e-12)


def test_enumeration_on_example_1():
    g = load_fixture("example-1", bound=1.0)
    assert lattice_size(g) == 9
    S = enumerate_equilibria(g)
    assert [p.tolist() for p in S] == [[0.0, 0.0]]
    assert S.assignments_checked == 9


def test_enumeration_on_example_2_with_continuous_path():
    # the same game with a continuous coordinate per player that is pinned at 0
    g = load_fixture("example-2", bound=2.0)
    S = enumerate_equilibria(g)
    assert [p.tolist() for p in S] == [[0.0, 0.0]]
    Q = [[np.diag([1.0, 1.0]), np.diag([0.1, 0.0])], [np.diag([0.1, 0.0]), np.diag([1.0, 1.0])]]
    mixed = QuadGame(dims=(2, 2), int_counts=(1, 1), Q=Q, c=[[-0.3, 0.0], [-0.3, 0.0]],
                     lower=[[-2.0, -1.0]] * 2, upper=[[2.0, 1.0]] * 2)
    S = enumerate_equilibria(mixed)
    assert len(S) == 1
    np.testing.assert_allclose(S.points[0], [0.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_budget_is_enforced():
    with pytest.raises(OracleBudgetError):
        enumerate_equilibria(load_fixture("example-2"), budget=100)


def test_player_relabeling_permutes_the_equilibrium_set():
    rng = np.random.default_rng(17)
    for _ in range(5):
        g = integer_game(rng, max_points=3000)
        order = list(range(g.n_players))[::-1]
        h = QuadGame(dims=[g.dims[v] for v in order], int_counts=[g.int_counts[v] for v in order],
                     Q=[[g.Q[v][u] for u in order] for v in order], c=[g.c[v] for v in order],
                     lower=[g.lower[v] for v in order], upper=[g.upper[v] for v in order])
        S = {tuple(np.concatenate([g.split(p)[v] for v in order])) for p in enumerate_equilibria(g)}
        assert S == {tuple(p) for p in enumerate_equilibria(h)}


def test_converged_runs_end_in_the_oracle_set():
    rng = np.random.default_rng(40)
    for _ in range(5):
        g = integer_game(rng, max_points=2000)
        S = enumerate_equilibria(g)
        t = run_mixed(g, random_point(rng, g), "gs")
        if t.converged:
            assert S.contains(t.final)
