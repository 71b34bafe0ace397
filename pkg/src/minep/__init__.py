"""Quadratic mixed-integer Nash games: best-response iterations, convergence
certificates, bounds, and brute-force oracles."""
from .game import QuadGame, block_norm, cost, game_mapping, partial_grad, restrict, validate
from .fixtures import FIXTURES, load_fixture
from .br import continuous_br, inexact_br, mixed_br, rounded_br
from .certify import (beta_certificate, condensed_matrix, contraction_certificate,
                      existence_certificate, find_weights, strong_monotonicity)
from .iterate import Schedule, run_continuous, run_mixed, solve_two_phase
from .oracle import enumerate_equilibria, verify_equilibrium
from .estimators import (EquilibriumOracle, GameCertifier, MixedIntegerEquilibrium,
                         RelaxedEquilibrium, TwoPhaseEquilibrium)

__version__ = "0.1.0"
