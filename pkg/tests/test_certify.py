import math

import numpy as np
import pytest

from minep import load_fixture
from minep.br import continuous_br
from minep.certify import (CertificateError, beta_certificate, condensed_matrix,
                           contraction_certificate, existence_certificate, find_weights,
                           perturb_curvature, perturb_proximal, strong_monotonicity)
from minep.game import QuadGame, block_norm
from minep.iterate import run_continuous

from helpers import dominant_continuous_game, separable_mixed_game


def test_condensed_matrices():
    np.testing.assert_allclose(condensed_matrix(load_fixture("example-4")).matrix,
                               [[3, 2, 2], [2, 3, 2], [2, 2, 3]], atol=1e-12)
    np.testing.assert_allclose(condensed_matrix(load_fixture("example-5")).matrix,
                               [[2, 1], [9, 10]], atol=1e-12)


def test_decoupled_game_has_diagonal_condensed_matrix():
    g = QuadGame(dims=(2, 1), int_counts=(0, 0),
                 Q=[[np.diag([1.0, 4.0]), np.zeros((2, 1))], [np.zeros((1, 2)), [[2.0]]]],
                 c=[[0.0, 0.0], [0.0]], lower=None, upper=None)
    U = condensed_matrix(g).matrix
    np.testing.assert_allclose(U, np.diag([1.0, 2.0]), atol=1e-12)
    assert contraction_certificate(U).alpha == 0.0


def test_unit_weight_certificates():
    ex5 = contraction_certificate(condensed_matrix(load_fixture("example-5")))
    assert ex5.dominant and ex5.alpha == pytest.approx(0.9, abs=1e-12)
    ex4 = contraction_certificate(condensed_matrix(load_fixture("example-4")))
    assert not ex4.dominant and ex4.alpha == pytest.approx(4 / 3, abs=1e-12)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.5])
def test_example_1_modulus(eps):
    cert = contraction_certificate(condensed_matrix(load_fixture("example-1", eps=eps)), [1, 1])
    assert cert.dominant and cert.alpha == pytest.approx((1 + eps) / 2, abs=1e-12)


def test_weight_search():
    assert find_weights(condensed_matrix(load_fixture("example-4"))).spectral_radius >= 1
    assert not find_weights(condensed_matrix(load_fixture("example-4"))).dominant
    # a matrix dominant only with non-unit weights
    U = np.array([[1.0, 2.0], [0.1, 1.0]])
    assert not contraction_certificate(U).dominant
    cert = find_weights(U)
    assert cert.dominant and cert.alpha < 1


def test_strong_monotonicity():
    assert strong_monotonicity(load_fixture("example-4")) == pytest.approx(1.0, abs=1e-9)
    assert strong_monotonicity(load_fixture("example-5")) < 0
    ident = QuadGame(dims=(1, 1), int_counts=(0, 0), Q=[[[[1.0]], [[0.0]]], [[[0.0]], [[1.0]]]],
                     c=[[0.0], [0.0]], lower=None, upper=None)
    assert strong_monotonicity(ident) == pytest.approx(1.0)


def _contracts(game, w, alpha, rng, pairs=100):
    def T(x):
        return np.concatenate([continuous_br(game, v, x).x for v in range(game.n_players)])

    for _ in range(pairs):
        z, y = rng.normal(size=game.n) * 5, rng.normal(size=game.n) * 5
        lhs = block_norm(w, T(z) - T(y), game.dims)
        if lhs > alpha * block_norm(w, z - y, game.dims) + 1e-8:
            return False
    return True


@pytest.mark.parametrize("perturb", [perturb_proximal, perturb_curvature])
def test_perturbations_of_example_4(perturb):
    g = load_fixture("example-4")
    p = perturb(g, 0.5)
    cert = contraction_certificate(condensed_matrix(p))
    assert cert.dominant and cert.alpha <= 0.5 + 1e-12
    assert strong_monotonicity(p) >= strong_monotonicity(g) - 1e-12
    U = condensed_matrix(p).matrix
    assert np.all(np.diag(U) >= (U.sum(axis=1) - np.diag(U)) / 0.5 - 1e-12)
    assert _contracts(p, np.ones(3), cert.alpha, np.random.default_rng(0))


def test_proximal_shift_value():
    p = perturb_proximal(load_fixture("example-4"), 0.5)
    # eta = 4 / 0.5 - 1 = 7 on every own block
    np.testing.assert_allclose([p.Q[v][v][0, 0] for v in range(3)], [10.0] * 3)
    c = perturb_curvature(load_fixture("example-4"), 0.5)
    np.testing.assert_allclose([c.Q[v][v][0, 0] for v in range(3)], [24.0] * 3)


def test_perturbation_leaves_dominant_game_alone():
    g = load_fixture("example-4")
    p = perturb_proximal(g, 0.5)
    again = perturb_proximal(p, 0.5)
    for v in range(3):
        np.testing.assert_allclose(again.Q[v][v], p.Q[v][v])
    again = perturb_curvature(p, 0.5)
    for v in range(3):
        np.testing.assert_allclose(again.Q[v][v], p.Q[v][v])


def test_perturbation_needs_monotone_game():
    with pytest.raises(CertificateError):
        perturb_proximal(load_fixture("example-5"), 0.5)


def test_contraction_on_random_games():
    rng = np.random.default_rng(11)
    for _ in range(5):
        g = dominant_continuous_game(rng)
        cert = find_weights(condensed_matrix(g))
        assert cert.dominant
        assert _contracts(g, cert.w, cert.alpha, rng, pairs=30)


def test_beta_certificates():
    assert beta_certificate(load_fixture("example-1")).beta == 0.5
    assert beta_certificate(load_fixture("example-1")).basis == "quadratic-separable"
    with pytest.raises(CertificateError):
        beta_certificate(load_fixture("example-4"))


def test_general_beta_from_condition_number():
    # own Hessian with eigenvalues 12 and 1200, integer first coordinate
    Q = np.diag([12.0, 1200.0])
    R = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
    g = QuadGame(dims=(2,), int_counts=(1,), Q=[[R @ Q @ R.T]], c=[[0.0, 0.0]],
                 lower=[[-3.0, -1.0]], upper=[[3.0, 1.0]])
    cert = beta_certificate(g, "general")
    # 0.5 * sqrt(1200 / 12) = 5.00; reported rounded up as 5.01 in the application study
    assert cert.beta == pytest.approx(5.0, abs=1e-9)
    assert abs(cert.beta - 5.01) <= 0.01 + 1e-12


def test_separable_beta_rejects_coupled_integers():
    g = QuadGame(dims=(2,), int_counts=(2,), Q=[[np.array([[2.0, 1.0], [1.0, 2.0]])]],
                 c=[[0.0, 0.0]], lower=[[-2.0, -2.0]], upper=[[2.0, 2.0]])
    assert beta_certificate(g).basis == "general"


def test_discrete_gap_on_separable_games():
    from minep.br import mixed_br

    rng = np.random.default_rng(5)
    for _ in range(5):
        g = separable_mixed_game(rng)
        beta = beta_certificate(g).beta
        assert beta == 0.5
        for _ in range(5):
            x = rng.uniform(np.concatenate(g.lower), np.concatenate(g.upper))
            for v in range(g.n_players):
                gap = np.linalg.norm(mixed_br(g, v, x).x - continuous_br(g, v, x).x)
                assert gap <= beta * math.sqrt(g.int_counts[v]) + 1e-8


def test_existence_on_example_2():
    g = load_fixture("example-2")
    x_bar = run_continuous(g.replace(int_counts=(0, 0)), np.zeros(2), "jacobi", 1000, 1e-14).final
    np.testing.assert_allclose(x_bar, [0.3 * 0.9 / 0.99] * 2, atol=1e-10)
    cert = existence_certificate(g, x_bar, 0.1, 0.5, [1, 1])
    assert cert.certified
    assert cert.radius_used == pytest.approx(0.5 / 0.9)
    np.testing.assert_array_equal(np.concatenate(cert.fixed_integers), [0.0, 0.0])


def test_existence_fails_on_example_3():
    g = load_fixture("example-3", eps=0.05)
    cert = existence_certificate(g, [0.5, 0.5], 0.05, 0.5, [1, 1])
    assert not cert.certified
    assert cert.radius_used == pytest.approx(0.5 / 0.95)
    assert cert.candidates_found == [2, 2]


def test_existence_at_integer_relaxed_solution():
    g = load_fixture("example-1")
    cert = existence_certificate(g, [0.0, 0.0], 0.55, 0.2, [1, 1])
    assert cert.radius_used < 0.5 and cert.certified
