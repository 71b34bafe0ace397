"""scikit-learn style front ends.

Each estimator takes its settings in ``__init__`` (so ``get_params`` and
``set_params`` work and it can be cloned), does its work in ``fit(game)``
and stores results in attributes with a trailing underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .br import BranchCache, continuous_br, inexact_br, mixed_br
from .certify import (CertificateError, beta_certificate, condensed_matrix,
                      contraction_certificate, find_weights, strong_monotonicity)
from .iterate import relaxed_start, rounded_start, run_continuous, run_mixed, solve_two_phase
from .oracle import enumerate_equilibria, equilibrium_gaps
from .validation import check_game, check_joint_point, check_weights

__all__ = ["GameCertifier", "RelaxedEquilibrium", "MixedIntegerEquilibrium",
           "TwoPhaseEquilibrium", "EquilibriumOracle"]


class GameCertifier(BaseEstimator):
    """Condensed matrix, contraction weights, discrete-gap constant and
    strong monotonicity of a game.

    ``weights`` is ``"search"`` (look for dominating weights), ``"unit"``
    or an explicit vector.
    """

    def __init__(self, weights="search", beta_basis="auto"):
        self.weights = weights
        self.beta_basis = beta_basis

    def fit(self, game, y=None):
        game = check_game(game)
        self.upsilon_ = condensed_matrix(game).matrix
        if isinstance(self.weights, str) and self.weights == "search":
            cert = find_weights(self.upsilon_)
        elif isinstance(self.weights, str) and self.weights == "unit":
            cert = contraction_certificate(self.upsilon_)
        else:
            cert = contraction_certificate(self.upsilon_, check_weights(self.weights, game.n_players))
        self.certificate_ = cert
        self.w_, self.alpha_, self.dominant_ = cert.w, cert.alpha, cert.dominant
        self.spectral_radius_ = cert.spectral_radius
        self.mu_ = strong_monotonicity(game)
        try:
            self.gap_ = beta_certificate(game, self.beta_basis)
            self.beta_ = self.gap_.beta
        except CertificateError:
            self.gap_, self.beta_ = None, None
        return self


class RelaxedEquilibrium(BaseEstimator):
    """Best-response iteration on the continuous relaxation.

    ``transform(X)`` applies one simultaneous continuous best-response
    sweep to each row of ``X``.
    """

    def __init__(self, schedule="gauss-seidel", max_iter=1000, step_tol=1e-10, weights=None):
        self.schedule = schedule
        self.max_iter = max_iter
        self.step_tol = step_tol
        self.weights = weights

    def fit(self, game, y=None, x0=None):
        game = check_game(game)
        relaxed = game.replace(int_counts=(0,) * game.n_players)
        x0 = relaxed_start(game) if x0 is None else check_joint_point(game, x0, feasible=True, relaxed=True)
        w = check_weights(self.weights, game.n_players)
        self.game_ = game
        self.trace_ = run_continuous(relaxed, x0, self.schedule, self.max_iter, self.step_tol, w)
        self.equilibrium_ = self.trace_.final
        self.converged_ = self.trace_.converged
        self.n_iter_ = self.trace_.iterations
        return self

    def transform(self, X):
        check_is_fitted(self, "game_")
        game = self.game_.replace(int_counts=(0,) * self.game_.n_players)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        for r, x in enumerate(X):
            x = check_joint_point(game, x)
            for v in range(game.n_players):
                out[r, game.block(v)] = continuous_br(game, v, x).x
        return out


class MixedIntegerEquilibrium(BaseEstimator):
    """Best-response iteration over the mixed-integer strategy sets.

    ``fit(game, x0=...)`` starts from ``x0`` (default: the relaxed
    equilibrium rounded into the integer boxes). ``predict(X)`` returns the
    largest unilateral improvement available at each row of ``X``; zero
    means the row is an equilibrium.
    """

    def __init__(self, schedule="gauss-seidel", max_iter=60, step_tol=1e-6, epsilon=0.0,
                 weights=None, node_limit=200_000, detect_cycles=True):
        self.schedule = schedule
        self.max_iter = max_iter
        self.step_tol = step_tol
        self.epsilon = epsilon
        self.weights = weights
        self.node_limit = node_limit
        self.detect_cycles = detect_cycles

    def fit(self, game, y=None, x0=None):
        game = check_game(game)
        self._cache = BranchCache()
        if x0 is None:
            relaxed = game.replace(int_counts=(0,) * game.n_players)
            x_bar = run_continuous(relaxed, relaxed_start(game), "jacobi", 1000, 1e-10).final
            x0 = rounded_start(game, x_bar, self._cache)
        x0 = check_joint_point(game, x0, feasible=True)
        w = check_weights(self.weights, game.n_players)
        self.game_ = game
        self.trace_ = run_mixed(game, x0, self.schedule, self.max_iter, self.step_tol,
                                self.epsilon, w, self.detect_cycles, self.node_limit, self._cache)
        self.equilibrium_ = self.trace_.final
        self.stop_reason_ = self.trace_.stop_reason
        self.converged_ = self.trace_.converged
        self.cycle_ = self.trace_.cycle
        self.n_iter_ = self.trace_.iterations
        return self

    def transform(self, X):
        """One simultaneous mixed-integer best-response sweep per row."""
        check_is_fitted(self, "game_")
        game = self.game_
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        for r, x in enumerate(X):
            x = check_joint_point(game, x, feasible=True)
            for v in range(game.n_players):
                if self.epsilon > 0:
                    res = inexact_br(game, v, x, self.epsilon, self.node_limit, self._cache)
                else:
                    res = mixed_br(game, v, x, self.node_limit, self._cache)
                out[r, game.block(v)] = res.x
        return out

    def predict(self, X):
        check_is_fitted(self, "game_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([float(np.max(equilibrium_gaps(self.game_, check_joint_point(self.game_, x),
                                                       self.node_limit, self._cache)))
                         for x in X])


class TwoPhaseEquilibrium(BaseEstimator):
    """Relax, try to certify that the integers are pinned, then finish."""

    def __init__(self, schedule="gauss-seidel", max_iter=60, step_tol=1e-6, epsilon=0.0,
                 exhaustive=False):
        self.schedule = schedule
        self.max_iter = max_iter
        self.step_tol = step_tol
        self.epsilon = epsilon
        self.exhaustive = exhaustive

    def fit(self, game, y=None):
        game = check_game(game)
        res = solve_two_phase(game, self.schedule, self.max_iter, self.step_tol,
                              exhaustive=self.exhaustive, epsilon=self.epsilon)
        self.relaxed_trace_ = res.trace_relaxed
        self.relaxed_equilibrium_ = res.trace_relaxed.final
        self.certificate_ = res.certificate
        self.certified_ = bool(res.certificate is not None and res.certificate.certified)
        self.trace_ = res.trace_mixed
        final = res.trace_mixed if res.trace_mixed is not None else res.trace_relaxed
        self.equilibrium_ = final.final
        self.stop_reason_ = final.stop_reason
        self.converged_ = final.converged
        return self


class EquilibriumOracle(BaseEstimator):
    """Every mixed-integer equilibrium of a small game by enumeration.

    ``predict(X)`` flags the rows of ``X`` that belong to the set.
    """

    def __init__(self, budget=10_000, tol=1e-8):
        self.budget = budget
        self.tol = tol

    def fit(self, game, y=None):
        game = check_game(game)
        self.game_ = game
        self.result_ = enumerate_equilibria(game, self.budget, self.tol)
        self.equilibria_ = np.array(self.result_.points).reshape(-1, game.n)
        self.n_equilibria_ = len(self.result_)
        return self

    def predict(self, X, atol=1e-6):
        check_is_fitted(self, "result_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.result_.contains(x, atol) for x in X], dtype=bool)
