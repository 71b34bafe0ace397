"""Jacobi / Gauss-Seidel best-response iterations on the mixed-integer game and
on its continuous relaxation, plus the relax-then-fix two-phase solve."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .br import BranchCache, continuous_br, inexact_br, mixed_br
from .certify import (CertificateError, ExistenceCertificate, beta_certificate,
                      condensed_matrix, existence_certificate, find_weights)
from .game import QuadGame, block_norm, restrict
from .qp import find_feasible_point

__all__ = ["Schedule", "IterateTrace", "TwoPhaseResult", "run_mixed", "run_continuous",
           "solve_two_phase", "relaxed_start", "rounded_start"]

log = logging.getLogger(__name__)

CYCLE_QUANTUM = 1e-9


class Schedule:
    """Which players update at iteration ``k``.

    ``kind`` is ``"jacobi-full"`` (everyone, every iteration),
    ``"gauss-seidel-cyclic"`` (player ``k mod N``) or ``"custom"`` (an explicit
    list of player subsets repeated cyclically). ``h`` is the revisit period:
    every window of ``h`` consecutive iterations updates every player.
    """

    _ALIASES = {"jacobi": "jacobi-full", "jacobi-full": "jacobi-full",
                "gs": "gauss-seidel-cyclic", "gauss-seidel": "gauss-seidel-cyclic",
                "gauss-seidel-cyclic": "gauss-seidel-cyclic", "custom": "custom"}

    def __init__(self, kind: str, n_players: int, subsets: Sequence[Sequence[int]] | None = None):
        try:
            self.kind = self._ALIASES[kind]
        except KeyError:
            raise ValueError(f"unknown schedule kind {kind!r}") from None
        self.n_players = int(n_players)
        if self.kind == "jacobi-full":
            self.subsets = [tuple(range(self.n_players))]
        elif self.kind == "gauss-seidel-cyclic":
            self.subsets = [(v,) for v in range(self.n_players)]
        else:
            if not subsets:
                raise ValueError("a custom schedule needs a nonempty list of subsets")
            self.subsets = [tuple(sorted(set(int(v) for v in s))) for s in subsets]
            for s in self.subsets:
                if any(not 0 <= v < self.n_players for v in s):
                    raise ValueError(f"schedule subset {s} names an unknown player")
        self.h = self._revisit_period()

    def _revisit_period(self) -> int:
        P = len(self.subsets)
        everyone = set(range(self.n_players))
        worst = 0
        for start in range(P):
            seen: set = set()
            for length in range(1, P + 1):
                seen.update(self.subsets[(start + length - 1) % P])
                if seen == everyone:
                    worst = max(worst, length)
                    break
            else:
                raise ValueError("schedule never updates some player")
        return worst

    @classmethod
    def coerce(cls, schedule, n_players: int) -> "Schedule":
        if isinstance(schedule, Schedule):
            if schedule.n_players != n_players:
                raise ValueError("schedule was built for a different number of players")
            return schedule
        return cls(schedule, n_players)

    @property
    def period(self) -> int:
        return len(self.subsets)

    def subset(self, k: int) -> tuple:
        return self.subsets[k % self.period]

    def __repr__(self):
        return f"Schedule({self.kind!r}, n_players={self.n_players}, h={self.h})"


@dataclass
class IterateTrace:
    points: list
    subsets: list = field(default_factory=list)
    responses: list = field(default_factory=list)  # per iteration: list of (player, status, delta, nodes)
    steps: list = field(default_factory=list)       # weighted block-norm step sizes
    steps_l2: list = field(default_factory=list)
    stop_reason: str = "max-iter"
    cycle: list | None = None
    w: np.ndarray | None = None
    schedule: str = ""
    h: int = 1

    @property
    def iterations(self) -> int:
        return len(self.points) - 1

    @property
    def final(self) -> np.ndarray:
        return self.points[-1]

    @property
    def converged(self) -> bool:
        return self.stop_reason == "converged"

    def tail(self, length: int | None = None) -> list:
        """Cycle points when a cycle was found, else the last ``length`` points."""
        if self.cycle:
            return list(self.cycle)
        length = length or self.h
        return self.points[-length:]

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule, "h": self.h, "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "points": [p.tolist() for p in self.points],
            "subsets": [list(s) for s in self.subsets],
            "responses": [[{"player": v, "status": s, "delta": d, "nodes": n} for v, s, d, n in r]
                          for r in self.responses],
            "steps": list(self.steps), "steps_l2": list(self.steps_l2),
            "cycle": None if self.cycle is None else [p.tolist() for p in self.cycle],
            "w": None if self.w is None else np.asarray(self.w).tolist(),
        }


def _state_key(x, int_mask):
    ints = tuple(int(z) for z in np.round(x[int_mask]))
    cont = tuple(int(z) for z in np.round(x[~int_mask] / CYCLE_QUANTUM))
    return ints, cont


def _iterate(game, x0, schedule, max_iter, step_tol, w, respond, detect_cycles, int_mask):
    sched = Schedule.coerce(schedule, game.n_players)
    w = np.ones(game.n_players) if w is None else np.asarray(w, dtype=float)
    x = np.array(x0, dtype=float, copy=True)
    trace = IterateTrace(points=[x.copy()], w=w, schedule=sched.kind, h=sched.h)
    window = max(2, sched.h)
    small = zero = 0
    seen = {(0, _state_key(x, int_mask)): 0} if detect_cycles else None
    total = max_iter * sched.h
    for k in range(total):
        J = sched.subset(k)
        x_new = x.copy()
        info = []
        for v in J:
            # Jacobi responds to x^k; Gauss-Seidel subsets are singletons so this is the same thing
            r = respond(v, x)
            x_new[game.block(v)] = r.x
            info.append((v, r.status, float(r.delta), int(r.nodes)))
        diff = x_new - x
        trace.steps.append(block_norm(w, diff, game.dims))
        step2 = float(np.linalg.norm(diff))
        trace.steps_l2.append(step2)
        trace.subsets.append(J)
        trace.responses.append(info)
        trace.points.append(x_new.copy())
        x = x_new
        small = small + 1 if step2 <= step_tol else 0
        zero = zero + 1 if step2 == 0.0 else 0
        if small >= window or zero >= sched.h:
            trace.stop_reason = "converged"
            return trace
        if detect_cycles:
            key = ((k + 1) % sched.period, _state_key(x, int_mask))
            if key in seen:
                start = seen[key]
                trace.stop_reason = "cycle-detected"
                trace.cycle = [p.copy() for p in trace.points[start:-1]]
                return trace
            seen[key] = k + 1
    trace.stop_reason = "max-iter"
    return trace


def run_mixed(game: QuadGame, x0, schedule="gauss-seidel", max_iter: int = 60,
              step_tol: float = 1e-6, epsilon: float = 0.0, w=None,
              detect_cycles: bool = True, node_limit: int = 200_000,
              cache: BranchCache | None = None) -> IterateTrace:
    """Best-response iteration over the mixed-integer sets.

    ``max_iter`` counts sweeps of ``h`` updates, so Gauss-Seidel performs up to
    ``max_iter * N`` single-player updates. Stops after ``max(2, h)``
    consecutive updates with Euclidean step at most ``step_tol``, on a repeated
    (state, schedule position) pair, or at the iteration cap.

    Branch-and-bound trees are reused between updates of the same player;
    pass ``cache`` to share them with later calls on the same game.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (game.n,) or not game.is_feasible(x0, tol=1e-7):
        raise ValueError("starting point is not a feasible mixed-integer point")

    cache = BranchCache() if cache is None else cache
    if epsilon > 0:
        def respond(v, x):
            return inexact_br(game, v, x, epsilon, node_limit, cache)
    else:
        def respond(v, x):
            return mixed_br(game, v, x, node_limit, cache)
    return _iterate(game, x0, schedule, max_iter, step_tol, w, respond, detect_cycles,
                    game.int_mask())


def run_continuous(game: QuadGame, x0, schedule="gauss-seidel", max_iter: int = 1000,
                   step_tol: float = 1e-10, w=None) -> IterateTrace:
    """Best-response iteration on the continuous relaxation."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (game.n,) or not game.is_feasible(x0, tol=1e-7, relaxed=True):
        raise ValueError("starting point is not in the relaxed feasible set")
    return _iterate(game, x0, schedule, max_iter, step_tol, w,
                    lambda v, x: continuous_br(game, v, x), False, np.zeros(game.n, dtype=bool))


def relaxed_start(game: QuadGame) -> np.ndarray:
    """Some point of the relaxed feasible set."""
    parts = []
    for v in range(game.n_players):
        p = find_feasible_point(game.lower[v], game.upper[v], game.A[v], game.b[v],
                                game.E[v], game.d[v])
        if p is None:
            raise ValueError(f"player {v}: relaxed feasible set is empty")
        parts.append(p)
    return np.concatenate(parts) if parts else np.zeros(0)


def rounded_start(game: QuadGame, x, cache: BranchCache | None = None) -> np.ndarray:
    """Round integer coordinates of ``x`` into the integer box; any player whose
    rounded block is infeasible is replaced by its best response against ``x``."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    for v in range(game.n_players):
        sl = game.block(v)
        ni = game.int_counts[v]
        xv = out[sl].copy()
        lo = np.ceil(game.lower[v][:ni] - 1e-9)
        hi = np.floor(game.upper[v][:ni] + 1e-9)
        xv[:ni] = np.clip(np.round(xv[:ni]), lo, hi)
        if not game.player_feasible(v, xv, tol=1e-7):
            xv = mixed_br(game, v, x, cache=cache).x
        out[sl] = xv
    return out


class TwoPhaseResult(NamedTuple):
    trace_relaxed: IterateTrace
    certificate: ExistenceCertificate | None
    trace_mixed: IterateTrace | None


def _lift(game, fixed, restricted, points):
    lifted = []
    for xr in points:
        parts = []
        for v, blk in enumerate(restricted.split(xr)):
            parts.append(np.concatenate([np.asarray(fixed[v], float), blk]))
        lifted.append(np.concatenate(parts))
    return lifted


def solve_two_phase(game: QuadGame, schedule="gauss-seidel", max_iter: int = 60,
                    step_tol: float = 1e-6, x0=None, alpha: float | None = None,
                    beta: float | None = None, w=None, relaxed_max_iter: int = 1000,
                    relaxed_step_tol: float = 1e-10, exhaustive: bool = False,
                    epsilon: float = 0.0, cache: BranchCache | None = None) -> TwoPhaseResult:
    """Solve the relaxation, test whether the ball around its solution pins
    the integers, then finish with either a continuous solve on the pinned
    game or mixed-integer iterations from the rounded relaxed solution."""
    x0 = relaxed_start(game) if x0 is None else np.asarray(x0, dtype=float)
    relaxed = game.replace(int_counts=(0,) * game.n_players)
    t_cont = run_continuous(relaxed, x0, schedule, relaxed_max_iter, relaxed_step_tol, w)
    x_bar = t_cont.final
    if sum(game.int_counts) == 0:
        return TwoPhaseResult(t_cont, None, None)

    if alpha is None or w is None:
        cc = find_weights(condensed_matrix(game))
        if not cc.dominant:
            raise CertificateError("no dominating weights: the relaxed solution is not certified")
        alpha = cc.alpha if alpha is None else alpha
        w = cc.w if w is None else w
    if beta is None:
        beta = beta_certificate(game).beta
    cert = existence_certificate(game, x_bar, alpha, beta, w, exhaustive=exhaustive)

    if cert.certified:
        fixed = cert.fixed_integers
        sub = restrict(game, fixed)
        start = np.concatenate([xb[game.int_counts[v]:] for v, xb in enumerate(game.split(x_bar))])
        if not sub.is_feasible(start, tol=1e-7):
            start = relaxed_start(sub)
        t = run_continuous(sub, start, schedule, relaxed_max_iter, relaxed_step_tol)
        t.points = _lift(game, fixed, sub, t.points)
        if t.cycle:
            t.cycle = _lift(game, fixed, sub, t.cycle)
        t.w = np.asarray(w, dtype=float)
        return TwoPhaseResult(t_cont, cert, t)

    cache = BranchCache() if cache is None else cache
    start = rounded_start(game, x_bar, cache)
    t_mixed = run_mixed(game, start, schedule, max_iter, step_tol, epsilon, w, cache=cache)
    return TwoPhaseResult(t_cont, cert, t_mixed)
