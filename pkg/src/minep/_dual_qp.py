"""Dual active-set QP kernel for positive definite Hessians.

Goldfarb and Idnani's method: start at the unconstrained minimizer, then
repeatedly add the most violated constraint while keeping dual feasibility,
dropping constraints whose multipliers would turn negative. The active set is
kept in a factorization ``J = L^{-T} Q`` with triangular ``R``, updated by
Givens rotations.

Problem form (columns are constraints)::

    min 1/2 x'Gx + g'x   s.t.   CE'x + ce = 0,   CI'x + ci >= 0
"""
from __future__ import annotations

import numpy as np
from numba import njit

OPTIMAL, INFEASIBLE, NOT_PD, DEPENDENT_EQ, MAX_ITER = 0, 1, 2, 3, 4


@njit(cache=True)
def _hypot(a, b):
    a, b = abs(a), abs(b)
    if a > b:
        return a * np.sqrt(1.0 + (b / a) ** 2)
    if b > 0.0:
        return b * np.sqrt(1.0 + (a / b) ** 2)
    return 0.0


@njit(cache=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def _add(R, J, d, iq, R_norm):
    n = d.shape[0]
    for j in range(n - 1, iq, -1):
        cc, ss = d[j - 1], d[j]
        h = _hypot(cc, ss)
        if h == 0.0:
            continue
        d[j] = 0.0
        ss /= h
        cc /= h
        if cc < 0.0:
            cc, ss = -cc, -ss
            d[j - 1] = -h
        else:
            d[j - 1] = h
        xny = ss / (1.0 + cc)
        for k in range(n):
            t1, t2 = J[k, j - 1], J[k, j]
            J[k, j - 1] = t1 * cc + t2 * ss
            J[k, j] = xny * (t1 + J[k, j - 1]) - t2
    iq += 1
    for i in range(iq):
        R[i, iq - 1] = d[i]
    ok = abs(d[iq - 1]) > 2.2e-16 * R_norm
    return iq, ok, max(R_norm, abs(d[iq - 1]))


@njit(cache=True)
def _delete(R, J, A, u, n, p, iq, l):
    qq = -1
    for i in range(p, iq):
        if A[i] == l:
            qq = i
            break
    if qq < 0:
        return iq
    for i in range(qq, iq - 1):
        A[i] = A[i + 1]
        u[i] = u[i + 1]
        for j in range(n):
            R[j, i] = R[j, i + 1]
    A[iq - 1] = A[iq]
    u[iq - 1] = u[iq]
    A[iq] = 0
    u[iq] = 0.0
    for j in range(iq):
        R[j, iq - 1] = 0.0
    iq -= 1
    if iq == 0:
        return iq
    for j in range(qq, iq):
        cc, ss = R[j, j], R[j + 1, j]
        h = _hypot(cc, ss)
        if h == 0.0:
            continue
        cc /= h
        ss /= h
        R[j + 1, j] = 0.0
        if cc < 0.0:
            R[j, j] = -h
            cc, ss = -cc, -ss
        else:
            R[j, j] = h
        xny = ss / (1.0 + cc)
        for k in range(j + 1, iq):
            t1, t2 = R[j, k], R[j + 1, k]
            R[j, k] = t1 * cc + t2 * ss
            R[j + 1, k] = xny * (t1 + R[j, k]) - t2
        for k in range(n):
            t1, t2 = J[k, j], J[k, j + 1]
            J[k, j] = t1 * cc + t2 * ss
            J[k, j + 1] = xny * (J[k, j] + t1) - t2
    return iq


@njit(cache=True)
def _directions(J, R, npv, d, z, r, iq):
    n = J.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += J[j, i] * npv[j]
        d[i] = s
    for i in range(n):
        s = 0.0
        for j in range(iq, n):
            s += J[i, j] * d[j]
        z[i] = s
    for i in range(iq - 1, -1, -1):
        s = 0.0
        for j in range(i + 1, iq):
            s += R[i, j] * r[j]
        r[i] = (d[i] - s) / R[i, i]


@njit(cache=True)
def solve_dense(G, g0, CE, ce0, CI, ci0, feas_tol, max_iter):
    """Returns ``(status, x, active, n_active, iterations)``; ``active`` lists
    inequality indices (equalities are always active)."""
    n, p, m = G.shape[0], CE.shape[1], CI.shape[1]
    x = np.zeros(n)
    A = np.zeros(m + p, dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)
    try:
        L = np.linalg.cholesky(G)
    except Exception:  # noqa: BLE001 - numba raises a generic error
        return NOT_PD, x, empty, 0, 0
    for i in range(n):
        if not L[i, i] > 0.0:
            return NOT_PD, x, empty, 0, 0
    # J = L^{-T}
    J = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        # forward solve L y = e
        y = np.zeros(n)
        for k in range(n):
            s = e[k]
            for j in range(k):
                s -= L[k, j] * y[j]
            y[k] = s / L[k, k]
        for j in range(n):
            J[i, j] = y[j]
    # unconstrained minimizer: x = -G^{-1} g0
    y = np.zeros(n)
    for k in range(n):
        s = -g0[k]
        for j in range(k):
            s -= L[k, j] * y[j]
        y[k] = s / L[k, k]
    for k in range(n - 1, -1, -1):
        s = y[k]
        for j in range(k + 1, n):
            s -= L[j, k] * x[j]
        x[k] = s / L[k, k]

    R = np.zeros((n, n))
    d = np.zeros(n)
    z = np.zeros(n)
    r = np.zeros(m + p)
    u = np.zeros(m + p)
    R_norm = 1.0
    iq = 0
    for i in range(p):
        npv = CE[:, i]
        _directions(J, R, npv, d, z, r, iq)
        zn = 0.0
        for k in range(n):
            zn += z[k] * npv[k]
        t2 = 0.0
        if abs(zn) > 1e-14:
            t2 = (-_dot(npv, x) - ce0[i]) / zn
        for k in range(n):
            x[k] += t2 * z[k]
        u[iq] = t2
        for k in range(iq):
            u[k] -= t2 * r[k]
        A[iq] = -i - 1
        iq, ok, R_norm = _add(R, J, d, iq, R_norm)
        if not ok:
            return DEPENDENT_EQ, x, empty, 0, 0

    iai = np.arange(m)
    excl = np.ones(m, dtype=np.bool_)
    s = np.zeros(m)
    x_old = x.copy()
    u_old = u.copy()
    A_old = A.copy()
    it = 0
    need_step1 = True
    ip = -1
    while it < max_iter:
        if need_step1:
            it += 1
            for i in range(p, iq):
                iai[A[i]] = -1
            worst = 0.0
            for i in range(m):
                excl[i] = True
                val = _dot(CI[:, i], x) + ci0[i]
                s[i] = val
            for i in range(p, iq):
                A_old[i] = A[i]
                u_old[i] = u[i]
            x_old[:] = x
        # step 2: most violated admissible constraint
        worst = 0.0
        ip = -1
        for i in range(m):
            if iai[i] != -1 and excl[i] and s[i] < -feas_tol[i] and s[i] < worst:
                worst = s[i]
                ip = i
        if ip < 0:
            act = np.zeros(iq - p, dtype=np.int64)
            for i in range(p, iq):
                act[i - p] = A[i]
            return OPTIMAL, x, act, iq - p, it
        npv = CI[:, ip]
        u[iq] = 0.0
        A[iq] = ip
        need_step1 = True
        while True:
            it += 1
            if it > max_iter:
                return MAX_ITER, x, empty, 0, it
            _directions(J, R, npv, d, z, r, iq)
            l = -1
            t1 = np.inf
            for k in range(p, iq):
                if r[k] > 0.0:
                    q = u[k] / r[k]
                    if q < t1:
                        t1 = q
                        l = A[k]
            zn = 0.0
            zz = 0.0
            for k in range(n):
                zn += z[k] * npv[k]
                zz += z[k] * z[k]
            t2 = -s[ip] / zn if zz > 1e-28 and zn > 0.0 else np.inf
            t = min(t1, t2)
            if t == np.inf:
                return INFEASIBLE, x, empty, 0, it
            if t2 == np.inf:
                for k in range(iq):
                    u[k] -= t * r[k]
                u[iq] += t
                iai[l] = l
                iq = _delete(R, J, A, u, n, p, iq, l)
                continue
            for k in range(n):
                x[k] += t * z[k]
            for k in range(iq):
                u[k] -= t * r[k]
            u[iq] += t
            if t == t2:
                iq, ok, R_norm = _add(R, J, d, iq, R_norm)
                if not ok:
                    # numerically dependent: undo and try another constraint
                    excl[ip] = False
                    iq = _delete(R, J, A, u, n, p, iq, ip)
                    for i in range(m):
                        iai[i] = i
                    for i in range(p, iq):
                        A[i] = A_old[i]
                        u[i] = u_old[i]
                        iai[A[i]] = -1
                    x[:] = x_old
                    need_step1 = False
                else:
                    iai[ip] = -1
                break
            iai[l] = l
            iq = _delete(R, J, A, u, n, p, iq, l)
            s[ip] = _dot(CI[:, ip], x) + ci0[ip]
    return MAX_ITER, x, empty, 0, it
