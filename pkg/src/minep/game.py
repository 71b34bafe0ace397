"""Quadratic mixed-integer Nash games.

Player ``v`` controls the block ``x^v`` of length ``dims[v]`` whose first
``int_counts[v]`` coordinates are integer constrained, and pays

    theta_v(x) = 1/2 x^v' Q[v][v] x^v + sum_{u != v} x^v' Q[v][u] x^u + c_v' x^v + const_v

over the polyhedron ``{lower <= x^v <= upper, A_v x^v <= b_v, E_v x^v = d_v}``.

Joint points are flat float arrays of length ``sum(dims)``; use
:meth:`QuadGame.split` / :func:`numpy.concatenate` to move between the flat
and the per-player views.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "QuadGame",
    "validate",
    "cost",
    "partial_grad",
    "game_mapping",
    "block_norm",
    "restrict",
]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuadGame:
    """Immutable description of an N-player quadratic MI-NEP.

    Empty constraint families are stored as ``(0, n_v)`` matrices and
    ``(0,)`` vectors so callers never have to special-case them.
    """

    dims: tuple
    int_counts: tuple
    Q: tuple  # Q[v][u] has shape (dims[v], dims[u])
    c: tuple
    lower: tuple
    upper: tuple
    A: tuple = None
    b: tuple = None
    E: tuple = None
    d: tuple = None
    const: tuple = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        N = len(dims)
        if N == 0:
            raise ValueError("a game needs at least one player")
        set_ = object.__setattr__
        set_(self, "dims", dims)
        set_(self, "int_counts", tuple(int(i) for i in self.int_counts))
        if len(self.int_counts) != N:
            raise ValueError("int_counts must have one entry per player")
        if len(self.Q) != N or any(len(row) != N for row in self.Q):
            raise ValueError("Q must be an N x N nested sequence of blocks")
        Q = []
        for v in range(N):
            row = []
            for u in range(N):
                blk = np.atleast_2d(np.asarray(self.Q[v][u], dtype=float))
                if blk.size == 0:
                    blk = blk.reshape(dims[v], dims[u])
                if blk.shape != (dims[v], dims[u]):
                    raise ValueError(
                        f"Q[{v}][{u}] has shape {blk.shape}, expected {(dims[v], dims[u])}")
                row.append(_frozen(blk))
            Q.append(tuple(row))
        set_(self, "Q", tuple(Q))

        def vecs(values, name, fill=None):
            if values is None:
                values = [np.full(n, fill) for n in dims]
            if len(values) != N:
                raise ValueError(f"{name} must have one entry per player")
            out = []
            for v, val in enumerate(values):
                arr = np.atleast_1d(np.asarray(val, dtype=float))
                if arr.shape != (dims[v],):
                    raise ValueError(f"{name}[{v}] has length {arr.size}, expected {dims[v]}")
                out.append(_frozen(arr))
            return tuple(out)

        set_(self, "c", vecs(self.c, "c", 0.0))
        set_(self, "lower", vecs(self.lower, "lower", -np.inf))
        set_(self, "upper", vecs(self.upper, "upper", np.inf))

        def mats(mats_, rhs, name):
            if mats_ is None:
                mats_ = [np.zeros((0, n)) for n in dims]
            if rhs is None:
                rhs = [np.zeros(np.asarray(m).shape[0] if np.size(m) else 0) for m in mats_]
            if len(mats_) != N or len(rhs) != N:
                raise ValueError(f"{name} must have one entry per player")
            Ms, rs = [], []
            for v in range(N):
                M = np.asarray(mats_[v], dtype=float)
                if M.size == 0:
                    M = M.reshape(0, dims[v])
                M = np.atleast_2d(M)
                r = np.atleast_1d(np.asarray(rhs[v], dtype=float)).reshape(-1)
                if M.shape[1] != dims[v] or r.shape[0] != M.shape[0]:
                    raise ValueError(f"{name}[{v}] is inconsistent with dims[{v}]={dims[v]}")
                Ms.append(_frozen(M))
                rs.append(_frozen(r))
            return tuple(Ms), tuple(rs)

        A, b = mats(self.A, self.b, "A/b")
        E, d = mats(self.E, self.d, "E/d")
        set_(self, "A", A)
        set_(self, "b", b)
        set_(self, "E", E)
        set_(self, "d", d)
        const = self.const if self.const is not None else [0.0] * N
        if len(const) != N:
            raise ValueError("const must have one entry per player")
        set_(self, "const", tuple(float(k) for k in const))
        for v in range(N):
            if not 0 <= self.int_counts[v] <= dims[v]:
                raise ValueError(f"int_counts[{v}] outside [0, {dims[v]}]")

    # -- shape helpers -------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def block(self, v: int) -> slice:
        off = self.offsets
        return slice(int(off[v]), int(off[v + 1]))

    def split(self, x) -> list:
        x = np.asarray(x, dtype=float)
        return [x[self.block(v)] for v in range(self.n_players)]

    def int_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for v in range(self.n_players):
            s = self.block(v).start
            mask[s:s + self.int_counts[v]] = True
        return mask

    def stacked_matrix(self) -> np.ndarray:
        """Jacobian of the (affine) game mapping."""
        return np.block([[self.Q[v][u] for u in range(self.n_players)]
                         for v in range(self.n_players)])

    def stacked_c(self) -> np.ndarray:
        return np.concatenate(self.c)

    def linear_term(self, v: int, x) -> np.ndarray:
        """``c_v + sum_{u != v} Q[v][u] x^u``: the own-block linear coefficient."""
        x = np.asarray(x, dtype=float)
        g = np.array(self.c[v], copy=True)
        for u in range(self.n_players):
            if u != v:
                g += self.Q[v][u] @ x[self.block(u)]
        return g

    def replace(self, **changes) -> "QuadGame":
        kw = dict(dims=self.dims, int_counts=self.int_counts, Q=self.Q, c=self.c,
                  lower=self.lower, upper=self.upper, A=self.A, b=self.b,
                  E=self.E, d=self.d, const=self.const, name=self.name)
        kw.update(changes)
        return QuadGame(**kw)

    def player_feasible(self, v: int, xv, tol: float = 1e-9) -> bool:
        xv = np.asarray(xv, dtype=float)
        if np.any(xv < self.lower[v] - tol) or np.any(xv > self.upper[v] + tol):
            return False
        if self.A[v].shape[0] and np.any(self.A[v] @ xv > self.b[v] + tol):
            return False
        if self.E[v].shape[0] and np.any(np.abs(self.E[v] @ xv - self.d[v]) > tol):
            return False
        ni = self.int_counts[v]
        return bool(np.all(np.abs(xv[:ni] - np.round(xv[:ni])) <= tol))

    def is_feasible(self, x, tol: float = 1e-9, relaxed: bool = False) -> bool:
        game = self if not relaxed else self.replace(int_counts=(0,) * self.n_players)
        return all(game.player_feasible(v, xv, tol) for v, xv in enumerate(self.split(x)))

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"QuadGame{tag}(dims={self.dims}, int_counts={self.int_counts})"


def _check_player(game, v):
    if not 0 <= v < game.n_players:
        raise IndexError(f"player index {v} out of range for {game.n_players} players")


def validate(game: QuadGame, tol: float = 1e-10) -> list:
    """Return a list of human readable diagnostics; empty iff the game is well formed."""
    from .qp import find_feasible_point

    issues = []
    for v in range(game.n_players):
        Qvv = game.Q[v][v]
        asym = float(np.max(np.abs(Qvv - Qvv.T))) if Qvv.size else 0.0
        if asym > tol * max(1.0, float(np.max(np.abs(Qvv)))):
            issues.append(f"player {v}: Q[{v}][{v}] not symmetric (residual {asym:.3g})")
        lam = float(np.min(np.linalg.eigvalsh(0.5 * (Qvv + Qvv.T))))
        if lam <= tol:
            issues.append(f"player {v}: Q[{v}][{v}] not positive definite (min eigenvalue {lam:.3g})")
        ni = game.int_counts[v]
        if ni and not (np.all(np.isfinite(game.lower[v][:ni])) and np.all(np.isfinite(game.upper[v][:ni]))):
            issues.append(f"player {v}: integer coordinates need finite bounds")
        if np.any(game.lower[v] > game.upper[v]) or find_feasible_point(
                game.lower[v], game.upper[v], game.A[v], game.b[v], game.E[v], game.d[v]) is None:
            issues.append(f"player {v}: infeasible player set")
    return issues


def cost(game: QuadGame, v: int, x) -> float:
    _check_player(game, v)
    x = np.asarray(x, dtype=float)
    xv = x[game.block(v)]
    return float(0.5 * xv @ game.Q[v][v] @ xv + xv @ game.linear_term(v, x) + game.const[v])


def partial_grad(game: QuadGame, v: int, x) -> np.ndarray:
    _check_player(game, v)
    x = np.asarray(x, dtype=float)
    return game.Q[v][v] @ x[game.block(v)] + game.linear_term(v, x)


def game_mapping(game: QuadGame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n,):
        raise ValueError(f"joint point has shape {x.shape}, expected ({game.n},)")
    return game.stacked_matrix() @ x + game.stacked_c()


def block_norm(w, x, dims: Sequence[int] | None = None) -> float:
    """Weighted block max-norm ``max_v w_v ||x^v||_2``.

    ``x`` is either a sequence of per-player blocks or, with ``dims``, a
    flat vector.
    """
    w = np.asarray(w, dtype=float)
    if dims is not None:
        x = np.asarray(x, dtype=float)
        bounds = np.concatenate([[0], np.cumsum(dims)])
        blocks = [x[bounds[k]:bounds[k + 1]] for k in range(len(dims))]
    else:
        blocks = [np.atleast_1d(np.asarray(xb, dtype=float)) for xb in x]
    if len(blocks) != w.shape[0]:
        raise ValueError("weight vector and point have different block counts")
    return float(max(wv * np.linalg.norm(xb) for wv, xb in zip(w, blocks)))


def restrict(game: QuadGame, fixed_ints: Sequence) -> QuadGame:
    """Continuous game left after pinning every player's integer coordinates.

    ``fixed_ints[v]`` holds the ``int_counts[v]`` pinned values. Players whose
    whole block is integer keep a zero-length block. Each restricted cost
    differs from the original only by terms that do not involve the player's
    own free variables, so best responses are unchanged.
    """
    N = game.n_players
    keep = [slice(game.int_counts[v], game.dims[v]) for v in range(N)]
    fix = [np.asarray(fixed_ints[v], dtype=float).reshape(game.int_counts[v]) for v in range(N)]
    Q, c, const, A, b, E, d = [], [], [], [], [], [], []
    for v in range(N):
        kv, fv = keep[v], fix[v]
        ni = game.int_counts[v]
        Q.append([game.Q[v][u][kv, keep[u]] for u in range(N)])
        lin = game.c[v][kv] + game.Q[v][v][kv, :ni] @ fv
        k0 = 0.5 * fv @ game.Q[v][v][:ni, :ni] @ fv + game.c[v][:ni] @ fv + game.const[v]
        for u in range(N):
            if u != v:
                lin = lin + game.Q[v][u][kv, :game.int_counts[u]] @ fix[u]
                k0 += fv @ game.Q[v][u][:ni, :game.int_counts[u]] @ fix[u]
        c.append(lin)
        const.append(k0)
        A.append(game.A[v][:, kv])
        b.append(game.b[v] - game.A[v][:, :ni] @ fv)
        E.append(game.E[v][:, kv])
        d.append(game.d[v] - game.E[v][:, :ni] @ fv)
    return QuadGame(
        dims=[game.dims[v] - game.int_counts[v] for v in range(N)],
        int_counts=[0] * N, Q=Q, c=c, const=const,
        lower=[game.lower[v][keep[v]] for v in range(N)],
        upper=[game.upper[v][keep[v]] for v in range(N)],
        A=A, b=b, E=E, d=d, name=game.name + "|restricted" if game.name else "")
