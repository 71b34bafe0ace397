"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .game import QuadGame, validate

__all__ = ["check_game", "check_joint_point", "check_weights", "InvalidGameError"]


class InvalidGameError(ValueError):
    """The game violates a structural invariant."""

    def __init__(self, issues):
        super().__init__("; ".join(issues))
        self.issues = list(issues)


def check_game(game, strict: bool = True) -> QuadGame:
    """Coerce ``game`` to a :class:`QuadGame`.

    Accepts a game, a fixture name, a path to a JSON document, a parsed
    document dict or a :class:`~minep.io.GameDocument`. With ``strict`` the
    game must also pass :func:`minep.game.validate`.
    """
    from . import io
    from .fixtures import FIXTURES, load_fixture

    if isinstance(game, io.GameDocument):
        game = game.game
    elif isinstance(game, dict):
        game = io.document_from_dict(game).game if "schema_version" in game else io.game_from_dict(game)
    elif isinstance(game, str) and game in FIXTURES:
        game = load_fixture(game)
    elif isinstance(game, (str, Path)):
        game = io.load_game(game)
    if not isinstance(game, QuadGame):
        raise TypeError(f"expected a QuadGame, got {type(game).__name__}")
    if strict:
        issues = validate(game)
        if issues:
            raise InvalidGameError(issues)
    return game


def check_joint_point(game: QuadGame, x, feasible: bool = False, relaxed: bool = False,
                      tol: float = 1e-7) -> np.ndarray:
    """Flat float copy of ``x``; per-player blocks are concatenated.

    With ``feasible`` the point must lie in the joint strategy set (its
    relaxation when ``relaxed``).
    """
    if isinstance(x, (list, tuple)) and len(x) == game.n_players and len(x) and \
            all(np.ndim(b) == 1 for b in x):
        blocks = [np.asarray(b, dtype=float) for b in x]
        if [b.shape[0] for b in blocks] != list(game.dims):
            raise ValueError(f"block lengths {[b.shape[0] for b in blocks]} do not match dims {list(game.dims)}")
        x = np.concatenate(blocks)
    x = np.array(x, dtype=float).reshape(-1)
    if x.shape != (game.n,):
        raise ValueError(f"joint point has {x.shape[0]} entries, expected {game.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("joint point has non-finite entries")
    if feasible and not game.is_feasible(x, tol=tol, relaxed=relaxed):
        raise ValueError("joint point is not feasible")
    return x


def check_weights(w, n_players: int) -> np.ndarray:
    """Strictly positive weight vector of length ``n_players`` (ones if ``None``)."""
    if w is None:
        return np.ones(n_players)
    w = np.array(w, dtype=float).reshape(-1)
    if w.shape != (n_players,):
        raise ValueError(f"expected {n_players} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be finite and strictly positive")
    return w
