import itertools
import math

import numpy as np
import pytest

from minep import load_fixture
from minep.br import (BranchCache, InfeasibleError, continuous_br, inexact_br, integer_curvature,
                      mixed_br, rounded_br)
from minep.game import QuadGame, cost, partial_grad
from minep.qp import solve_qp

from helpers import integer_game, mixed_game, random_point, separable_mixed_game


def _brute_force(game, v, x):
    """Best value over every integer assignment, continuous part by QP."""
    ni = game.int_counts[v]
    lo = np.ceil(game.lower[v][:ni])
    hi = np.floor(game.upper[v][:ni])
    H, g = game.Q[v][v], game.linear_term(v, x)
    best = math.inf
    for z in itertools.product(*[np.arange(a, b + 1) for a, b in zip(lo, hi)]):
        l, u = np.array(game.lower[v], copy=True), np.array(game.upper[v], copy=True)
        l[:ni] = u[:ni] = z
        res = solve_qp(H, g, l, u, game.A[v], game.b[v], game.E[v], game.d[v])
        if res.status == "optimal":
            best = min(best, res.value + game.const[v])
    return best


def test_example_1_responses():
    g = load_fixture("example-1", eps=0.1)
    assert continuous_br(g, 0, [0.0, 1.0]).x[0] == pytest.approx(-0.55, abs=1e-12)
    assert mixed_br(g, 0, [0.0, 1.0]).x[0] == -1.0


def test_example_6_responses():
    g = load_fixture("example-6", upsilon=3.0)
    np.testing.assert_allclose(continuous_br(g, 0, [0.0, 0.0]).x, [0.5, 0.5], atol=1e-10)
    np.testing.assert_array_equal(mixed_br(g, 0, [0.0, 0.0]).x, [1.0, 2.0])


def test_interior_response_is_stationary():
    g = load_fixture("example-2", bound=50.0)
    x = np.array([0.0, 2.0])
    t = continuous_br(g, 0, x).x
    np.testing.assert_allclose(t, -np.linalg.solve(g.Q[0][0], g.linear_term(0, x)), atol=1e-12)


def test_integral_relaxation_is_returned_unchanged():
    g = load_fixture("example-2", eta=(2.0, 1.0), eps=(0.5, 0.5))
    x = [0.0, 2.0]  # T_1 = 2 - 0.5 * 2 = 1
    np.testing.assert_allclose(mixed_br(g, 0, x).x, continuous_br(g, 0, x).x, atol=1e-12)


def test_rounded_response_ties_go_up():
    g = load_fixture("example-2", eta=(0.5, 0.3), eps=(0.0, 0.0))
    assert rounded_br(g, 0, [0.0, 0.0]).x[0] == 1.0
    g = load_fixture("example-2")
    assert continuous_br(g, 0, [0.0, 0.2727]).x[0] == pytest.approx(0.27273)
    assert rounded_br(g, 0, [0.0, 0.2727]).x[0] == 0.0
    g = load_fixture("example-2", eta=(2.0, 0.0), eps=(0.0, 0.0))
    assert rounded_br(g, 0, [0.0, 0.0]).x[0] == 2.0


def test_rounded_response_needs_box_only_integers():
    with pytest.raises(ValueError):
        rounded_br(load_fixture("example-6"), 0, [0.0, 0.0])


def test_inexact_response():
    g = load_fixture("example-1")
    x = np.array([0.0, 1.0])
    exact = mixed_br(g, 0, x)
    same = inexact_br(g, 0, x, 0.0)
    np.testing.assert_array_equal(same.x, exact.x)
    loose = inexact_br(g, 0, x, 0.5)
    assert loose.delta <= 0.5
    assert np.linalg.norm(loose.x - exact.x) <= 0.5
    with pytest.raises(ValueError):
        inexact_br(g, 0, x, -1.0)


def test_infeasible_player():
    g = QuadGame(dims=(1,), int_counts=(0,), Q=[[[[1.0]]]], c=[[0.0]], lower=[[0.0]], upper=[[1.0]],
                 A=[[[1.0]]], b=[[-1.0]])
    with pytest.raises(InfeasibleError):
        continuous_br(g, 0, [0.5])


def test_continuous_response_variational_inequality():
    rng = np.random.default_rng(8)
    for _ in range(5):
        g = separable_mixed_game(rng)
        x = random_point(rng, g, integer=False)
        for v in range(g.n_players):
            t = continuous_br(g, v, x).x
            y = x.copy()
            y[g.block(v)] = t
            grad = partial_grad(g, v, y)
            for _ in range(100):
                z = random_point(rng, g, integer=False)[g.block(v)]
                if not g.player_feasible(v, z) and g.A[v].shape[0]:
                    continue
                assert grad @ (z - t) >= -1e-7 * np.linalg.norm(z - t)


def test_rounding_chain():
    rng = np.random.default_rng(9)
    for _ in range(5):
        g = separable_mixed_game(rng)
        x = random_point(rng, g)
        for v in range(g.n_players):
            L = float(np.linalg.eigvalsh(g.Q[v][v])[-1])
            mixed = mixed_br(g, v, x).value
            rounded = rounded_br(g, v, x).value
            relaxed = continuous_br(g, v, x).value
            assert mixed <= rounded + 1e-9
            assert rounded <= relaxed + L / 8 * g.int_counts[v] + 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_matches_enumeration_on_integer_games(seed):
    rng = np.random.default_rng(100 + seed)
    g = integer_game(rng, max_points=2000)
    x = random_point(rng, g)
    for v in range(g.n_players):
        res = mixed_br(g, v, x)
        assert res.status == "optimal"
        assert res.value == pytest.approx(_brute_force(g, v, x), rel=1e-10, abs=1e-10)
        y = x.copy()
        y[g.block(v)] = res.x
        assert cost(g, v, y) == pytest.approx(res.value, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_matches_enumeration_on_mixed_games(seed):
    rng = np.random.default_rng(200 + seed)
    g = mixed_game(rng)
    x = random_point(rng, g)
    for v in range(g.n_players):
        assert mixed_br(g, v, x).value == pytest.approx(_brute_force(g, v, x), rel=1e-9, abs=1e-9)


def test_building_player_matches_enumeration():
    from minep.smart_building import BuildingParams, direct_start, generate_instance

    g = generate_instance(BuildingParams(n_users=2, horizon=2, appliances=(2, 2), seed=4), 0)
    assert g.int_counts == (4, 4)
    d, A = integer_curvature(g, 0)
    assert d > 0 and A.shape[0] > 0  # per-appliance sums are picked up as steep directions
    x = direct_start(g)
    cache = BranchCache()
    for _ in range(2):
        res = mixed_br(g, 0, x, cache=cache)
        assert res.value == pytest.approx(_brute_force(g, 0, x), rel=1e-9)
        x[g.block(1)] = mixed_br(g, 1, x).x


def test_cache_reuse_matches_fresh_solves():
    rng = np.random.default_rng(21)
    for _ in range(3):
        g = separable_mixed_game(rng)
        cache = BranchCache()
        for _ in range(6):
            x = random_point(rng, g)
            for v in range(g.n_players):
                warm = mixed_br(g, v, x, cache=cache)
                cold = mixed_br(g, v, x)
                assert warm.value == pytest.approx(cold.value, rel=1e-10, abs=1e-10)
        assert len(cache) == sum(1 for i in g.int_counts if i)


def test_node_limit_is_reported():
    from minep.smart_building import BuildingParams, direct_start, generate_instance

    g = generate_instance(BuildingParams(n_users=2, horizon=2, appliances=(2, 2), seed=4), 0)
    x = direct_start(g)
    cut = mixed_br(g, 0, x, node_limit=1)
    assert cut.status == "node_limit"
    assert g.player_feasible(0, cut.x, tol=1e-7)
    assert cut.value >= mixed_br(g, 0, x).value - 1e-9
