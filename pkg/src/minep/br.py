"""Best responses: continuous (convex QP), mixed-integer (branch and bound),
nearest-integer rounding, and certified inexact responses."""
from __future__ import annotations

import heapq
import math
import weakref
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from .game import QuadGame
from .qp import solve_qp

__all__ = ["BRResult", "BranchCache", "continuous_br", "mixed_br", "rounded_br", "inexact_br",
           "integer_box_only", "InfeasibleError"]

INT_TOL = 1e-9
WIDE_SHARE = 0.99


class InfeasibleError(ValueError):
    """A player's feasible set is empty."""


@dataclass
class BRResult:
    x: np.ndarray
    value: float
    status: str  # "optimal" | "inexact" | "node_limit"
    delta: float = 0.0
    nodes: int = 0


def _own_qp(game: QuadGame, v: int, x):
    return game.Q[v][v], game.linear_term(v, x)


def _solve_node(game, v, g, lo, hi, x0=None, tol=1e-9, H=None, working0=None):
    return solve_qp(game.Q[v][v] if H is None else H, g, lo, hi, game.A[v], game.b[v],
                    game.E[v], game.d[v], x0=x0, tol=tol, working0=working0)


def continuous_br(game: QuadGame, v: int, x, tol: float = 1e-9) -> BRResult:
    """Minimizer of ``theta_v(., x^-v)`` over the relaxed set ``X_v``."""
    H, g = _own_qp(game, v, x)
    res = _solve_node(game, v, g, game.lower[v], game.upper[v], tol=tol)
    if res.status == "infeasible":
        raise InfeasibleError(f"player {v}: relaxed feasible set is empty")
    return BRResult(res.x, res.value + game.const[v], "optimal")


def _branch_index(z):
    """Integer coordinate with the largest fractional part (lowest index on ties)."""
    frac = z - np.floor(z)
    frac[(frac <= INT_TOL) | (frac >= 1 - INT_TOL)] = -1.0
    j = int(np.argmax(frac))
    return (j, float(frac[j])) if frac[j] > 0 else (-1, 0.0)


def _cutoff(best, rel):
    return best - rel * (1.0 + abs(best)) if math.isfinite(best) else math.inf


_CURV_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _schur(game, v, equalities=False):
    """Curvature of the own cost on the integer block when the continuous
    coordinates follow optimally, optionally while keeping the equality rows
    that only involve them."""
    ni = game.int_counts[v]
    Q = 0.5 * (game.Q[v][v] + game.Q[v][v].T)
    S = Q[:ni, :ni]
    if ni == game.dims[v]:
        return S
    Qcc, Qzc = Q[ni:, ni:], Q[:ni, ni:]
    E = game.E[v]
    rows = E[np.all(E[:, :ni] == 0, axis=1), ni:] if E.shape[0] else E[:, ni:]
    N = null_space(rows) if equalities and rows.shape[0] else np.eye(Qcc.shape[0])
    if N.shape[1] == 0:
        return S
    R = N.T @ Qcc @ N
    return S - Qzc @ N @ np.linalg.solve(R, N.T @ Qzc.T)


def integer_curvature(game: QuadGame, v: int):
    """Integer structure of player ``v``'s cost used by branch and bound.

    Returns ``(d, A)``. ``d`` is the smallest eigenvalue of the Schur
    complement onto the integer block, shrunk by a relative 1e-6 so that
    ``Q_vv - d * diag(1_int, 0)`` stays positive definite. The rows of ``A``
    are eigenvectors of the Schur complement taken on the equality subspace
    whose entries all lie in {-1, 0, 1}: integer linear forms along which
    the cost curves more steeply than along single coordinates.
    """
    per_game = _CURV_CACHE.setdefault(game, {})
    if v not in per_game:
        ni = game.int_counts[v]
        if ni == 0:
            per_game[v] = (0.0, np.zeros((0, 0)))
            return per_game[v]
        S0 = _schur(game, v)
        d = float(np.min(np.linalg.eigvalsh(0.5 * (S0 + S0.T))))
        S = _schur(game, v, equalities=True)
        lam, U = np.linalg.eigh(0.5 * (S + S.T))
        lo = float(lam[0])
        dirs = []
        for i in range(ni):
            if lam[i] - lo <= 1e-6 * max(1.0, abs(lo)):
                continue
            u = U[:, i] / np.max(np.abs(U[:, i]))
            a = np.round(u)
            if np.max(np.abs(u - a)) <= 1e-8 and np.count_nonzero(a) > 1:
                dirs.append(a * np.sign(a[np.flatnonzero(a)[0]]))
        per_game[v] = (max(0.0, (1.0 - 1e-6) * d), np.array(dirs).reshape(-1, ni))
    return per_game[v]


class _Node(NamedTuple):
    lo: np.ndarray
    hi: np.ndarray
    slo: np.ndarray  # bounds on the integer forms ``A z``
    shi: np.ndarray


class _NodeRelaxation:
    """Node lower bound with a share of the integer curvature ``d`` moved out
    of the Hessian and replaced by the chord of ``z^2`` between ``k`` and ``k+1``.

    The chord ``(2k+1) z - k(k+1)`` never exceeds ``z^2`` at integers, so the
    bound is valid for every integer point of the node; it equals the true
    objective at integer points with ``z in {k, k+1}``. Branching bounds on
    the forms ``A z`` enter as extra linear rows.
    """

    def __init__(self, game, v, g):
        self.game, self.v, self.g = game, v, g
        self.ni = game.int_counts[v]
        self.d, self.A = integer_curvature(game, v)
        self._Q = np.asarray(game.Q[v][v], dtype=float)
        self._H = {}
        n = game.dims[v]
        self._Arows = np.hstack([self.A, np.zeros((self.A.shape[0], n - self.ni))])

    def shares(self, node):
        """Curvature moved per integer: all of it on boxes of width one, where
        the chord is the exact convex envelope, and most of it elsewhere."""
        ni = self.ni
        narrow = node.hi[:ni] - node.lo[:ni] <= 1
        return np.where(narrow, self.d, WIDE_SHARE * self.d), narrow

    def hessian(self, narrow):
        key = narrow.tobytes()
        H = self._H.get(key)
        if H is None:
            H = self._Q.copy()
            ni = self.ni
            H[np.arange(ni), np.arange(ni)] -= np.where(narrow, self.d, WIDE_SHARE * self.d)
            self._H[key] = H
        return H

    def ranges(self, lo, hi):
        P, M = np.maximum(self.A, 0), np.minimum(self.A, 0)
        return P @ lo[:self.ni] + M @ hi[:self.ni], P @ hi[:self.ni] + M @ lo[:self.ni]

    def root(self, lo, hi):
        return _Node(lo, hi, *self.ranges(lo, hi))

    def anchors(self, z, node):
        ni = self.ni
        return np.clip(np.floor(z[:ni] + INT_TOL), node.lo[:ni],
                       np.maximum(node.lo[:ni], node.hi[:ni] - 1))

    def solve(self, node, k, x0=None, working0=None):
        ni, game, v = self.ni, self.game, self.v
        d, narrow = self.shares(node)
        g = np.array(self.g, copy=True)
        g[:ni] += 0.5 * d * (2 * k + 1)
        const = -0.5 * float(np.sum(d * k * (k + 1)))
        A, b = game.A[v], game.b[v]
        if self.A.shape[0]:
            smin, smax = self.ranges(node.lo, node.hi)
            up, dn = node.shi < smax, node.slo > smin
            if np.any(up) or np.any(dn):
                A = np.vstack([A, self._Arows[up], -self._Arows[dn]])
                b = np.concatenate([b, node.shi[up], -node.slo[dn]])
        res = solve_qp(self.hessian(narrow), g, node.lo, node.hi, A, b, game.E[v], game.d[v],
                       x0=x0, working0=working0)
        if res.status in ("max_iter", "unbounded"):
            raise RuntimeError(f"player {v}: node relaxation failed ({res.status})")
        res.value += const
        return res

    def bound(self, node, z_hint, x0=None, working0=None):
        """Solve with anchors at ``z_hint``, re-anchor once at the new solution;
        return the stronger of the two bounds."""
        k = self.anchors(z_hint, node)
        res = self.solve(node, k, x0, working0)
        if res.status == "infeasible" or self.d == 0.0:
            return res, k
        k2 = self.anchors(res.x, node)
        if np.array_equal(k, k2):
            return res, k
        res2 = self.solve(node, k2, res.x, res.working)
        return (res2, k2) if res2.value > res.value else (res, k)

    def branch(self, z, k, node):
        """Children of ``node`` at relaxed integers ``z``, or ``None`` when the
        node is solved. Boxes of fractional integers are trimmed to width one
        first, then fractional forms ``A z`` are split."""
        ni = self.ni
        frac = z - np.floor(z)
        wide = (frac > INT_TOL) & (frac < 1 - INT_TOL) & (node.hi[:ni] - node.lo[:ni] > 1)
        if np.any(wide):
            zw = np.where(wide, z, np.floor(z))
            j, _ = _branch_index(zw)
        elif self.A.shape[0]:
            s = self.A @ z
            j, _ = _branch_index(s)
            if j >= 0:
                shi, slo = node.shi.copy(), node.slo.copy()
                shi[j], slo[j] = math.floor(s[j]), math.ceil(s[j])
                return [node._replace(shi=shi), node._replace(slo=slo)], float(s[j] - math.floor(s[j]))
            j, _ = _branch_index(z)
        else:
            j, _ = _branch_index(z)
        if j < 0:
            off = np.flatnonzero((z != k) & (z != k + 1))
            if off.size == 0:
                return None, 0.0
            j = int(off[0])
        a, b = _split(j, float(z[j]), node.lo, node.hi)
        frac = float(z[j] - a)
        # trim the box to [a, b] first so the chord there becomes exact
        if node.lo[j] < a and b - a == 1:
            a, b = a - 1, a
        elif node.hi[j] > b and b - a == 1:
            a, b = b, b + 1
        hi_c = node.hi.copy()
        hi_c[j] = a
        lo_c = node.lo.copy()
        lo_c[j] = b
        return [node._replace(hi=hi_c), node._replace(lo=lo_c)], frac


def _split(j, z, lo, hi):
    """Children bounds ``(hi_j = a)`` and ``(lo_j = b)`` for branching at ``z``."""
    if z - math.floor(z) > INT_TOL and math.ceil(z) - z > INT_TOL:
        return math.floor(z), math.ceil(z)
    zi = round(z)
    return (zi, zi + 1) if zi < hi[j] else (zi - 1, zi)


class BranchCache:
    """Closed branch-and-bound frontiers, one per player, for reuse when the
    same player is solved again against a different opponent profile.

    A frontier partitions the player's integer points into nodes with a lower
    bound each. When only the linear term moves by ``dg``, every bound stays
    valid after adding ``min dg'x`` over the node's box, so nodes whose
    shifted bound still reaches the incumbent need no new work. Coordinates
    with ``dg != 0`` must be bounded for this shift to exist.
    """

    def __init__(self):
        self._store = {}

    def get(self, v):
        return self._store.get(v)

    def put(self, v, entry):
        self._store[v] = entry

    def __len__(self):
        return len(self._store)


def _shifted_bounds(entry, g, lo0, hi0, ni):
    dg = g - entry["g"]
    moved = np.flatnonzero(dg)
    if moved.size == 0:
        return entry["bound"].copy()
    if not (np.all(np.isfinite(lo0[moved])) and np.all(np.isfinite(hi0[moved]))):
        return None
    cont = moved[moved >= ni]
    base = float(np.sum(np.minimum(dg[cont] * lo0[cont], dg[cont] * hi0[cont])))
    ints = moved[moved < ni]
    if ints.size:
        L, U = entry["lo"][:, ints], entry["hi"][:, ints]
        base = base + np.sum(np.minimum(dg[ints] * L, dg[ints] * U), axis=1)
    return entry["bound"] + base


def _branch_and_bound(game, v, x, node_limit, first_incumbent=False, hint=None, cache=None):
    ni = game.int_counts[v]
    _, g = _own_qp(game, v, x)
    lo0 = np.array(game.lower[v], copy=True)
    hi0 = np.array(game.upper[v], copy=True)
    lo0[:ni] = np.ceil(lo0[:ni] - INT_TOL)
    hi0[:ni] = np.floor(hi0[:ni] + INT_TOL)
    if np.any(lo0 > hi0):
        raise InfeasibleError(f"player {v}: no integer point in the box")

    plain = _solve_node(game, v, g, lo0, hi0)
    if plain.status == "infeasible":
        raise InfeasibleError(f"player {v}: feasible set is empty")
    relax = _NodeRelaxation(game, v, g)
    best_x, best_val = None, math.inf
    nodes = 1

    def try_fixed(z, x_start, lo, hi):
        nonlocal best_x, best_val, nodes
        lo_f, hi_f = lo0.copy(), hi0.copy()
        lo_f[:ni] = hi_f[:ni] = z
        res = _solve_node(game, v, g, lo_f, hi_f, x0=np.clip(x_start, lo_f, hi_f))
        nodes += 1
        if res.status != "infeasible" and res.value < _cutoff(best_val, 1e-12):
            best_x, best_val = res.x, res.value
            return True
        return False

    def admissible(z):
        return np.all(z == np.round(z)) and np.all(z >= lo0[:ni]) and np.all(z <= hi0[:ni])

    entry = cache.get(v) if cache is not None and not first_incumbent else None
    if not first_incumbent:
        # incumbents from the player's current integers, the previous answer,
        # and rounding the relaxation
        for zh in (hint, None if entry is None else entry["best"]):
            if zh is not None and admissible(np.asarray(zh, float)[:ni]):
                try_fixed(np.asarray(zh, float)[:ni], plain.x, lo0, hi0)
        try_fixed(np.clip(np.round(plain.x[:ni]), lo0[:ni], hi0[:ni]), plain.x, lo0, hi0)

    closed = []

    def close(node, bound):
        closed.append((node, bound))

    counter = 0
    heap = []
    shifted = None if entry is None else _shifted_bounds(entry, g, lo0, hi0, ni)
    if shifted is not None:
        for i in np.argsort(shifted, kind="stable"):
            lo, hi = lo0.copy(), hi0.copy()
            lo[:ni], hi[:ni] = entry["lo"][i], entry["hi"][i]
            node = _Node(lo, hi, entry["slo"][i], entry["shi"][i])
            counter += 1
            heap.append((float(shifted[i]), counter, node, None, None, None))
        heapq.heapify(heap)
    else:
        root = relax.root(lo0, hi0)
        res, k0 = relax.bound(root, plain.x[:ni], x0=plain.x)
        heap.append((res.value, counter, root, res.x, k0, res.working))
    status = "optimal"
    while heap:
        if first_incumbent:
            val, _, node, xr, k, wk = heap.pop()
        else:
            val, _, node, xr, k, wk = heapq.heappop(heap)
        if val >= _cutoff(best_val, 1e-10):
            close(node, val)
            continue
        if xr is None:  # node inherited from a cached frontier
            start = plain.x if best_x is None else best_x
            res, k = relax.bound(node, np.clip(start[:ni], node.lo[:ni], node.hi[:ni]),
                                 x0=np.clip(start, node.lo, node.hi))
            nodes += 1
            if res.status == "infeasible":
                close(node, math.inf)
                continue
            val, xr, wk = max(val, res.value), res.x, res.working
            if val >= _cutoff(best_val, 1e-10):
                close(node, val)
                continue
        z = xr[:ni]
        if _branch_index(z)[0] < 0:
            if try_fixed(np.round(z), xr, node.lo, node.hi) and first_incumbent:
                break
            z = np.round(z)
        children, frac = relax.branch(z, k, node)
        if children is None:
            close(node, val)  # the bound is exact here, so the node is solved
            continue
        if nodes >= node_limit:
            status = "node_limit"
            break
        if first_incumbent and frac > 0.5:
            children.reverse()
        kept = []
        for child in children:
            if np.any(child.lo > child.hi) or np.any(child.slo > child.shi):
                continue
            res, kc = relax.bound(child, z, x0=np.clip(xr, child.lo, child.hi), working0=wk)
            nodes += 1
            if res.status == "infeasible":
                close(child, math.inf)
                continue
            cval = max(res.value, val)
            if cval >= _cutoff(best_val, 1e-10):
                close(child, cval)
                continue
            kept.append((cval, child, res.x, kc, res.working))
        if first_incumbent:
            kept.reverse()  # preferred child ends on top of the stack
        for cval, child, cx, kc, cw in kept:
            counter += 1
            item = (cval, counter, child, cx, kc, cw)
            if first_incumbent:
                heap.append(item)
            else:
                heapq.heappush(heap, item)
    if best_x is None:
        if status == "node_limit":
            raise RuntimeError(f"player {v}: node budget exhausted before any integer point was found")
        raise InfeasibleError(f"player {v}: mixed-integer feasible set is empty")
    best_x = best_x.copy()
    best_x[:ni] = np.round(best_x[:ni])
    if cache is not None and status == "optimal" and not first_incumbent:
        r = relax.A.shape[0]
        cache.put(v, {"g": g,
                      "lo": np.array([c[0].lo[:ni] for c in closed]).reshape(len(closed), ni),
                      "hi": np.array([c[0].hi[:ni] for c in closed]).reshape(len(closed), ni),
                      "slo": np.array([c[0].slo for c in closed]).reshape(len(closed), r),
                      "shi": np.array([c[0].shi for c in closed]).reshape(len(closed), r),
                      "bound": np.array([c[1] for c in closed], dtype=float),
                      "best": best_x[:ni].copy()})
    return best_x, best_val + game.const[v], status, nodes


def mixed_br(game: QuadGame, v: int, x, node_limit: int = 200_000,
             cache: BranchCache | None = None) -> BRResult:
    """Global minimizer of ``theta_v(., x^-v)`` over ``Omega_v``.

    Best-first branch and bound over chord-strengthened node relaxations.
    The branching variable is the integer coordinate with the largest
    fractional part (lowest index on ties), floor child first; its box is
    first trimmed to the two integers around the relaxed value, and
    fractional integer sums along the cost's steep directions are split
    before single coordinates. The player's current integers in ``x`` seed
    the incumbent when they are feasible, so among equally good responses
    the current one is kept.
    Passing a :class:`BranchCache` lets repeated calls for the same game
    start from the previous closed frontier.
    """
    if game.int_counts[v] == 0:
        res = continuous_br(game, v, x)
        res.nodes = 1
        return res
    own = np.asarray(x, dtype=float)[game.block(v)]
    xb, val, status, nodes = _branch_and_bound(game, v, x, node_limit, hint=own, cache=cache)
    return BRResult(xb, val, status, 0.0, nodes)


def integer_box_only(game: QuadGame, v: int, tol: float = 0.0) -> bool:
    """True when no linear constraint of player ``v`` touches its integer coordinates."""
    ni = game.int_counts[v]
    for M in (game.A[v], game.E[v]):
        if M.shape[0] and np.any(np.abs(M[:, :ni]) > tol):
            return False
    return True


def rounded_br(game: QuadGame, v: int, x) -> BRResult:
    """Continuous best response with integer coordinates rounded to the nearer
    integer (halves go up)."""
    ni = game.int_counts[v]
    if not integer_box_only(game, v):
        raise ValueError(f"player {v}: integer coordinates appear in linear constraints")
    lo, hi = game.lower[v][:ni], game.upper[v][:ni]
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
            and np.all(lo == np.round(lo)) and np.all(hi == np.round(hi))):
        raise ValueError(f"player {v}: integer coordinates need integer bounds")
    t = continuous_br(game, v, x).x
    xr = t.copy()
    fl, ce = np.floor(t[:ni]), np.ceil(t[:ni])
    xr[:ni] = np.where(ce - t[:ni] <= t[:ni] - fl, ce, fl)
    H, g = _own_qp(game, v, x)
    val = float(0.5 * xr @ H @ xr + g @ xr + game.const[v])
    return BRResult(xr, val, "optimal")


def inexact_br(game: QuadGame, v: int, x, epsilon: float, node_limit: int = 200_000,
               cache: BranchCache | None = None) -> BRResult:
    """A response within ``epsilon`` (Euclidean) of an exact mixed-integer best response.

    The cheap candidate is the first incumbent of a depth-first dive; it is
    accepted only if its distance ``delta`` to the exact response is at most
    ``epsilon``, otherwise the exact response is returned.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    exact = mixed_br(game, v, x, node_limit, cache)
    if epsilon == 0 or game.int_counts[v] == 0:
        return exact
    cand, val, _, nodes = _branch_and_bound(game, v, x, node_limit, first_incumbent=True)
    delta = float(np.linalg.norm(cand - exact.x))
    if delta <= epsilon:
        status = "optimal" if delta == 0 else "inexact"
        return BRResult(cand, val, status, delta, exact.nodes + nodes)
    return BRResult(exact.x, exact.value, exact.status, 0.0, exact.nodes + nodes)
