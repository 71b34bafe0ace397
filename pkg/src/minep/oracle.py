"""Brute-force ground truth for small bounded games."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .br import BranchCache, mixed_br
from .certify import CertificateError, condensed_matrix, find_weights
from .game import QuadGame, block_norm, cost, restrict
from .iterate import relaxed_start, run_continuous

__all__ = ["EquilibriumSet", "OracleBudgetError", "verify_equilibrium", "equilibrium_gaps",
           "enumerate_equilibria", "lattice_size"]


class OracleBudgetError(RuntimeError):
    """The integer lattice is larger than the enumeration budget."""


@dataclass
class EquilibriumSet:
    points: list = field(default_factory=list)
    exhaustive: bool = True
    assignments_checked: int = 0

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def contains(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        return any(np.max(np.abs(p - x)) <= tol for p in self.points)

    def max_distance(self, center, w, dims) -> float:
        """Largest block-norm distance from ``center`` to a listed point (0 if empty)."""
        return max((block_norm(w, p - center, dims) for p in self.points), default=0.0)


def equilibrium_gaps(game: QuadGame, x, node_limit: int = 200_000,
                     cache: BranchCache | None = None) -> np.ndarray:
    """Per-player improvement available by a unilateral mixed-integer deviation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n,) or not game.is_feasible(x, tol=1e-7):
        raise ValueError("point is not feasible for the mixed-integer game")
    return np.array([cost(game, v, x) - mixed_br(game, v, x, node_limit, cache).value
                     for v in range(game.n_players)])


def verify_equilibrium(game: QuadGame, x, tol: float = 1e-8,
                       cache: BranchCache | None = None) -> bool:
    """True iff no player can lower its cost by more than ``tol``."""
    return bool(np.all(equilibrium_gaps(game, x, cache=cache) <= tol))


def _int_ranges(game):
    ranges = []
    for v in range(game.n_players):
        ni = game.int_counts[v]
        lo, hi = game.lower[v][:ni], game.upper[v][:ni]
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError(f"player {v}: integer coordinates must be finitely bounded")
        ranges.append([range(math.ceil(a - 1e-9), math.floor(b + 1e-9) + 1) for a, b in zip(lo, hi)])
    return ranges


def lattice_size(game: QuadGame) -> int:
    return math.prod(len(r) for rs in _int_ranges(game) for r in rs)


def _player_lattice(game, v, ranges):
    pts = [np.array(z, dtype=float) for z in itertools.product(*ranges)]
    if game.dims[v] == game.int_counts[v]:
        pts = [z for z in pts if game.player_feasible(v, z, tol=1e-9)]
    return pts


def _enumerate_pure_integer(game, lattices, tol):
    """Every joint lattice point is scored against every unilateral deviation,
    without calling any optimizer."""
    N = game.n_players
    X = np.array([np.concatenate(p) for p in itertools.product(*lattices)]) if all(lattices) \
        else np.zeros((0, game.n))
    if X.shape[0] == 0:
        return [], 0
    ok = np.ones(X.shape[0], dtype=bool)
    for v in range(N):
        sl = game.block(v)
        Z = np.array(lattices[v])                       # own candidates
        own = 0.5 * np.einsum("ij,jk,ik->i", Z, game.Q[v][v], Z) + Z @ game.c[v]
        cross = np.zeros((game.dims[v], game.n))         # maps x to sum_{u != v} Q_vu x^u
        for u in range(N):
            if u != v:
                cross[:, game.block(u)] = game.Q[v][u]
        lin = X @ cross.T                                # (P, n_v)
        xv = X[:, sl]
        current = 0.5 * np.einsum("ij,jk,ik->i", xv, game.Q[v][v], xv) + xv @ game.c[v] \
            + np.einsum("ij,ij->i", xv, lin)
        chunk = max(1, 2_000_000 // max(1, Z.shape[0]))
        best = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            best[s:s + chunk] = np.min(own[None, :] + lin[s:s + chunk] @ Z.T, axis=1)
        ok &= current - best <= tol
    return [X[i] for i in np.flatnonzero(ok)], X.shape[0]


def enumerate_equilibria(game: QuadGame, budget: int = 10_000, tol: float = 1e-8) -> EquilibriumSet:
    """All mixed-integer equilibria, by checking every integer assignment.

    Games with continuous coordinates need dominating weights for the whole
    game; they carry over to every restriction with the integers pinned, whose
    unique equilibrium is then computed by relaxed best-response iteration.
    """
    ranges = _int_ranges(game)
    size = math.prod(len(r) for rs in ranges for r in rs)
    if size > budget:
        raise OracleBudgetError(f"integer lattice has {size} points, budget is {budget}")
    lattices = [_player_lattice(game, v, ranges[v]) for v in range(game.n_players)]

    if game.n == sum(game.int_counts):
        pts, checked = _enumerate_pure_integer(game, lattices, tol)
        return EquilibriumSet(sorted(pts, key=tuple), True, checked)

    if not find_weights(condensed_matrix(game)).dominant:
        raise CertificateError("mixed-game enumeration needs a contraction certificate")
    found, checked = [], 0
    for combo in itertools.product(*lattices):
        checked += 1
        sub = restrict(game, combo)
        try:
            start = relaxed_start(sub)
        except ValueError:
            continue  # some player has no continuous completion
        t = run_continuous(sub, start, "jacobi", max_iter=20_000, step_tol=1e-13)
        parts = [np.concatenate([combo[v], blk]) for v, blk in enumerate(sub.split(t.final))]
        x = np.concatenate(parts)
        if not game.is_feasible(x, tol=1e-7):
            continue
        if np.all(equilibrium_gaps(game, x) <= tol):
            found.append(x)
    return EquilibriumSet(sorted(found, key=tuple), True, checked)
