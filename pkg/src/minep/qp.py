"""Convex QP solver used for best responses and node relaxations.

Solves ``min 1/2 x'Hx + g'x`` over ``{l <= x <= u, A x <= b, E x = d}`` by a
dual active-set method when ``H`` is positive definite, which terminates at
the exact minimizer up to round-off as branch-and-bound and the fixed-point
iterations need. Otherwise a primal active-set method runs from a feasible
point and handles semidefinite ``H`` by following descent rays of the
current face until a constraint blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from ._dual_qp import INFEASIBLE, OPTIMAL, solve_dense

__all__ = ["QPResult", "solve_qp", "find_feasible_point"]


@dataclass
class QPResult:
    x: np.ndarray
    value: float
    status: str  # "optimal" | "infeasible" | "unbounded" | "max_iter"
    working: tuple = ()
    iterations: int = 0


def find_feasible_point(lower, upper, A=None, b=None, E=None, d=None, tol=1e-9):
    """Return some point of the polyhedron, or ``None`` when it is empty."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[0]
    if np.any(lower > upper + tol):
        return None
    has_A = A is not None and np.size(A) > 0
    has_E = E is not None and np.size(E) > 0
    if n == 0:
        ok = (not has_A or np.all(np.asarray(b) >= -tol)) and (not has_E or np.all(np.abs(d) <= tol))
        return np.zeros(0) if ok else None
    if not has_A and not has_E:
        return np.clip(np.zeros(n), lower, upper)
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
              for lo, hi in zip(lower, upper)]
    res = linprog(np.zeros(n),
                  A_ub=A if has_A else None, b_ub=b if has_A else None,
                  A_eq=E if has_E else None, b_eq=d if has_E else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x, lower, upper)


def _rows(lower, upper, A, b):
    """Stacked inequalities ``G x <= h`` with a stable label per row."""
    n = lower.shape[0]
    labels = [("a", i) for i in range(A.shape[0])]
    up = np.flatnonzero(np.isfinite(upper))
    lo = np.flatnonzero(np.isfinite(lower))
    eye = np.eye(n)
    G = np.vstack([A, eye[up], -eye[lo]])
    h = np.concatenate([b, upper[up], -lower[lo]])
    labels += [("u", int(j)) for j in up] + [("l", int(j)) for j in lo]
    return G, h, labels


def solve_qp(H, g, lower, upper, A=None, b=None, E=None, d=None, x0=None,
             tol=1e-9, max_iter=None, working0=None) -> QPResult:
    """Minimize ``1/2 x'Hx + g'x`` over the polyhedron.

    Variables with equal lower and upper bounds are substituted out first.
    ``working0`` seeds the active set with labels from a previous
    :attr:`QPResult.working`; labels not active at ``x0`` are ignored.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if n == 0:
        return QPResult(np.zeros(0), 0.0, "optimal")
    A = np.asarray(A, dtype=float).reshape(-1, n) if A is not None and np.size(A) else np.zeros((0, n))
    b = np.asarray(b, dtype=float).reshape(-1) if A.shape[0] else np.zeros(0)
    E = np.asarray(E, dtype=float).reshape(-1, n) if E is not None and np.size(E) else np.zeros((0, n))
    d = np.asarray(d, dtype=float).reshape(-1) if E.shape[0] else np.zeros(0)
    if np.any(lower > upper):
        return QPResult(np.full(n, np.nan), np.inf, "infeasible")

    fixed = lower == upper
    if np.any(fixed):
        f = ~fixed
        xF = lower[fixed]
        x_full = np.empty(n)
        x_full[fixed] = xF
        gf = g[f] + H[np.ix_(f, fixed)] @ xF
        b_r = b - A[:, fixed] @ xF
        d_r = d - E[:, fixed] @ xF
        A_r, E_r = A[:, f], E[:, f]
        # rows that no longer involve any free variable only need a consistency check
        ka = np.any(A_r != 0, axis=1)
        ke = np.any(E_r != 0, axis=1)
        if np.any(b_r[~ka] < -1e-9) or np.any(np.abs(d_r[~ke]) > 1e-9):
            return QPResult(np.full(n, np.nan), np.inf, "infeasible")
        amap = np.flatnonzero(ka)
        fmap = np.flatnonzero(f)
        w0 = None
        if working0 is not None:
            inv_a = {int(i): r for r, i in enumerate(amap)}
            inv_f = {int(j): r for r, j in enumerate(fmap)}
            w0 = [(t, inv_a[i]) if t == "a" else (t, inv_f[i]) for t, i in working0
                  if (inv_a if t == "a" else inv_f).get(i) is not None]
        res = _solve_free(H[np.ix_(f, f)], gf, lower[f], upper[f], A_r[ka], b_r[ka], E_r[ke], d_r[ke],
                          None if x0 is None else np.asarray(x0, float)[f], tol, max_iter, w0)
        if res.status == "infeasible":
            return QPResult(np.full(n, np.nan), np.inf, "infeasible")
        x_full[f] = res.x
        working = tuple((t, int(amap[i])) if t == "a" else (t, int(fmap[i])) for t, i in res.working)
        return QPResult(x_full, float(0.5 * x_full @ H @ x_full + g @ x_full), res.status,
                        working, res.iterations)
    return _solve_free(H, g, lower, upper, A, b, E, d, x0, tol, max_iter, working0)


def _solve_free(H, g, lower, upper, A, b, E, d, x0, tol, max_iter, working0) -> QPResult:
    n = g.shape[0]
    if n == 0:
        return QPResult(np.zeros(0), 0.0, "optimal")
    res = _solve_dual(H, g, lower, upper, A, b, E, d, max_iter)
    if res is not None:
        return res
    return _solve_primal(H, g, lower, upper, A, b, E, d, x0, tol, max_iter, working0)


def _solve_dual(H, g, lower, upper, A, b, E, d, max_iter):
    """Dual active-set solve; ``None`` when ``H`` is not positive definite or
    the kernel gives up, so the caller can fall back to the primal method."""
    G, h, labels = _rows(lower, upper, A, b)
    feas = 1e-9 * (1.0 + np.abs(h)) * np.maximum(1.0, np.linalg.norm(G, axis=1))
    status, x, act, k, it = solve_dense(
        np.ascontiguousarray(H), g, np.ascontiguousarray(E.T), -d,
        np.ascontiguousarray(-G.T), h, feas, int(max_iter or 50 * (G.shape[0] + E.shape[0]) + 100))
    if status == INFEASIBLE:
        return QPResult(np.full(g.shape[0], np.nan), np.inf, "infeasible", (), it)
    if status != OPTIMAL:
        return None
    return QPResult(x, float(0.5 * x @ H @ x + g @ x), "optimal",
                    tuple(labels[i] for i in act[:k]), it)


def _solve_primal(H, g, lower, upper, A, b, E, d, x0, tol, max_iter, working0) -> QPResult:
    n = g.shape[0]
    G, h, labels = _rows(lower, upper, A, b)
    m, me = G.shape[0], E.shape[0]
    gnorm = np.linalg.norm(G, axis=1)

    feas_tol = 1e-8
    x = None
    if x0 is not None:
        x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
        if np.all(G @ x0 <= h + feas_tol) and (me == 0 or np.all(np.abs(E @ x0 - d) <= feas_tol)):
            x = x0
    if x is None:
        if me == 0 and A.shape[0] == 0:
            try:
                x = np.clip(np.linalg.solve(H, -g), lower, upper)
            except np.linalg.LinAlgError:
                x = np.clip(np.zeros(n), lower, upper)
        else:
            x = find_feasible_point(lower, upper, A, b, E, d)
            if x is None:
                return QPResult(np.full(n, np.nan), np.inf, "infeasible")
        working0 = None

    scale = max(1.0, float(np.max(np.abs(H))), float(np.max(np.abs(g))))
    working: list = []
    if working0:
        index = {lab: r for r, lab in enumerate(labels)}
        cand = [index[lab] for lab in working0 if lab in index]
        cand = [r for r in cand if abs(G[r] @ x - h[r]) <= 1e-9 * (1 + abs(h[r]))]
        if cand:
            C = np.vstack([E, G[cand]])
            if np.linalg.matrix_rank(C) == C.shape[0]:
                working = cand
    in_work = np.zeros(m, dtype=bool)
    in_work[working] = True
    max_iter = max_iter or 50 * (n + m + me) + 100
    degenerate = 0
    face_min = False
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        C = np.vstack([E, G[working]]) if working else E
        k = C.shape[0]
        grad = H @ x + g
        K = np.zeros((n + k, n + k))
        K[:n, :n] = H
        K[:n, n:] = C.T
        K[n:, :n] = C
        rhs = np.zeros(n + k)
        rhs[:n] = -grad
        ray = False
        try:
            sol = np.linalg.solve(K, rhs)
            solved = np.all(np.isfinite(sol)) and \
                np.linalg.norm(K @ sol - rhs) <= 1e-8 * (1.0 + np.linalg.norm(rhs))
        except np.linalg.LinAlgError:
            solved = False
        if not solved:
            # H is only semidefinite on this face: follow a descent ray if there is one
            Z = null_space(np.vstack([H, C]) if k else H)
            p = -Z @ (Z.T @ grad) if Z.shape[1] else np.zeros(n)
            if p @ p > 1e-24 * (1.0 + grad @ grad):
                ray = True
                sol = np.concatenate([p, np.zeros(k)])
            else:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        p = sol[:n]
        mu = sol[n + me:]
        pn = float(np.sqrt(p @ p))
        # after a full unblocked step x already minimizes over the working face
        if not ray and (face_min or pn <= 1e-12 * (1.0 + float(np.sqrt(x @ x)))):
            face_min = False
            if not working or np.min(mu) >= -tol * scale:
                status = "optimal"
                break
            neg = np.flatnonzero(mu < -tol * scale)
            # Bland's rule after repeated null steps prevents cycling at degenerate vertices
            drop = int(neg[0]) if degenerate > 5 else int(np.argmin(mu))
            in_work[working.pop(drop)] = False
            continue
        Gp = G @ p
        # rows nearly parallel to the step would make the working set dependent
        cand = np.flatnonzero((Gp > 1e-10 * gnorm * pn) & ~in_work)
        step, block = (math.inf if ray else 1.0), -1
        if cand.size:
            t = np.maximum(0.0, (h[cand] - G[cand] @ x) / Gp[cand])
            j = int(np.argmin(t))
            if t[j] < step:
                step, block = float(t[j]), int(cand[j])
        if math.isinf(step):
            status = "unbounded"
            break
        x = x + step * p
        face_min = block < 0
        degenerate = degenerate + 1 if step * pn <= 1e-12 * (1.0 + float(np.sqrt(x @ x))) else 0
        if block >= 0:
            working.append(block)
            in_work[block] = True
    x = np.clip(x, lower, upper)
    return QPResult(x, float(0.5 * x @ H @ x + g @ x), status,
                    tuple(labels[r] for r in working), it)
