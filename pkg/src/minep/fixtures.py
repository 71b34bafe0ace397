"""Small named games used throughout the docs and tests."""
from __future__ import annotations

import numpy as np

from .game import QuadGame

__all__ = ["example_1", "example_2", "example_3", "example_4", "example_5", "example_6",
           "FIXTURES", "load_fixture"]


def example_1(eps: float = 0.1, bound: float = 2.0) -> QuadGame:
    """Two integer players whose Gauss-Seidel iterates cycle around the origin.

    theta_1 = x1^2 + (1+eps) x1 x2,  theta_2 = x2^2 - (1+eps) x1 x2.
    """
    k = 1.0 + eps
    return QuadGame(
        dims=(1, 1), int_counts=(1, 1),
        Q=[[[[2.0]], [[k]]], [[[-k]], [[2.0]]]],
        c=[[0.0], [0.0]],
        lower=[[-bound], [-bound]], upper=[[bound], [bound]],
        name="example-1")


def example_2(eta=(0.3, 0.3), eps=(0.1, 0.1), bound: float = 5.0) -> QuadGame:
    """theta_v = 1/2 (x_v - eta_v)^2 + eps_v x1 x2 on integer boxes."""
    e1, e2 = eps
    return QuadGame(
        dims=(1, 1), int_counts=(1, 1),
        Q=[[[[1.0]], [[e1]]], [[[e2]], [[1.0]]]],
        c=[[-eta[0]], [-eta[1]]],
        const=[0.5 * eta[0] ** 2, 0.5 * eta[1] ** 2],
        lower=[[-bound], [-bound]], upper=[[bound], [bound]],
        name="example-2")


def example_3(eps: float = 0.05) -> QuadGame:
    """Binary two-player game without any equilibrium, for every eps > 0."""
    return QuadGame(
        dims=(1, 1), int_counts=(1, 1),
        Q=[[[[1.0]], [[eps]]], [[[-eps]], [[1.0]]]],
        c=[[-0.5 - 0.5 * eps], [-0.5 + 0.5 * eps]],
        const=[0.125, 0.125],
        lower=[[0.0], [0.0]], upper=[[1.0], [1.0]],
        name="example-3")


def example_4() -> QuadGame:
    """Strongly monotone (mu = 1) continuous game with no dominating weights."""
    Q = [[[[3.0 if u == v else 2.0]] for u in range(3)] for v in range(3)]
    return QuadGame(dims=(1, 1, 1), int_counts=(0, 0, 0), Q=Q, c=[[0.0]] * 3,
                    lower=None, upper=None, name="example-4")


def example_5() -> QuadGame:
    """Diagonally dominant (unit weights) continuous game that is not monotone."""
    return QuadGame(dims=(1, 1), int_counts=(0, 0),
                    Q=[[[[2.0]], [[1.0]]], [[[9.0]], [[10.0]]]],
                    c=[[0.0], [0.0]], lower=None, upper=None, name="example-5")


def example_6(upsilon: float = 3.0, cap: float = 20.0) -> QuadGame:
    """Single player, two integer coordinates, non-box polyhedron.

    X = {x1 >= 1/2, x2 >= upsilon x1 - (upsilon - 1)/2}; the box caps at
    ``cap`` only to make the integer coordinates bounded.
    """
    return QuadGame(
        dims=(2,), int_counts=(2,),
        Q=[[2.0 * np.eye(2)]], c=[np.zeros(2)],
        lower=[[0.5, 0.5]], upper=[[cap, upsilon * cap]],
        A=[[[upsilon, -1.0]]], b=[[(upsilon - 1.0) / 2.0]],
        name="example-6")


FIXTURES = {
    "example-1": example_1,
    "example-2": example_2,
    "example-3": example_3,
    "example-4": example_4,
    "example-5": example_5,
    "example-6": example_6,
}


def load_fixture(name: str, **params) -> QuadGame:
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return factory(**params)
