"""Certificates for the block-contraction and discrete-gap properties, the
strong-monotonicity constant, the perturbations that enforce contraction, and
the ball test for existence and uniqueness of a mixed-integer equilibrium."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .br import integer_box_only
from .game import QuadGame
from .qp import solve_qp

__all__ = [
    "CondensedMatrix", "ContractionCertificate", "DiscreteGapCertificate",
    "ExistenceCertificate", "CertificateError",
    "condensed_matrix", "contraction_certificate", "find_weights",
    "strong_monotonicity", "perturb_proximal", "perturb_curvature",
    "beta_certificate", "existence_certificate", "max_weighted_sqrt_int",
]


class CertificateError(ValueError):
    """A structural precondition of a certificate does not hold."""


@dataclass(frozen=True)
class CondensedMatrix:
    """``N x N`` matrix with own-block curvature on the diagonal and
    cross-block coupling norms off the diagonal."""

    matrix: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def off_diagonal(self) -> np.ndarray:
        return self.matrix - np.diag(np.diag(self.matrix))

    @property
    def n_players(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ContractionCertificate:
    w: np.ndarray
    alpha: float
    dominant: bool
    spectral_radius: float | None = None


@dataclass(frozen=True)
class DiscreteGapCertificate:
    beta: float
    basis: str
    L: float | None = None
    sigma: float | None = None


@dataclass
class ExistenceCertificate:
    certified: bool
    radius_used: float
    candidates_found: list
    fixed_integers: list | None = None
    exhaustive: bool = True
    candidates: list = field(default_factory=list)


def _spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def condensed_matrix(game: QuadGame) -> CondensedMatrix:
    N = game.n_players
    U = np.zeros((N, N))
    for v in range(N):
        Qvv = game.Q[v][v]
        lam = float(np.min(np.linalg.eigvalsh(0.5 * (Qvv + Qvv.T))))
        if lam <= 0:
            raise CertificateError(f"player {v}: Q[{v}][{v}] is not positive definite")
        U[v, v] = lam
        for u in range(N):
            if u != v:
                U[v, u] = _spectral_norm(game.Q[v][u])
    return CondensedMatrix(U)


def _as_matrix(upsilon) -> np.ndarray:
    return upsilon.matrix if isinstance(upsilon, CondensedMatrix) else np.asarray(upsilon, float)


def contraction_certificate(upsilon, w=None) -> ContractionCertificate:
    """Weighted row-dominance test; ``alpha`` is the worst weighted row ratio.

    When the test fails the returned ``alpha`` is that same ratio, now >= 1.
    """
    U = _as_matrix(upsilon)
    N = U.shape[0]
    w = np.ones(N) if w is None else np.asarray(w, dtype=float)
    if w.shape != (N,) or np.any(w <= 0):
        raise ValueError("weights must be a strictly positive vector of length N")
    inv = 1.0 / w
    ratios = np.empty(N)
    for v in range(N):
        off = sum(inv[u] * U[v, u] for u in range(N) if u != v)
        ratios[v] = off / (inv[v] * U[v, v])
    alpha = float(np.max(ratios))
    return ContractionCertificate(w, alpha, bool(np.all(ratios < 1.0)))


def find_weights(upsilon, slack: float = 1e-3) -> ContractionCertificate:
    """Search for dominating weights.

    Weighted strict dominance exists iff the Jacobi matrix ``D^-1 B`` of the
    condensed matrix (``B`` its off-diagonal part) has spectral radius below
    one. In that case ``v = (tI - D^-1 B)^-1 1`` with ``rho < t < 1`` is
    positive and satisfies ``D^-1 B v < t v``; the weights are ``1 / v``.
    """
    U = _as_matrix(upsilon)
    N = U.shape[0]
    D = np.diag(U)
    J = (U - np.diag(D)) / D[:, None]
    rho = float(np.max(np.abs(np.linalg.eigvals(J)))) if N > 1 else 0.0
    if rho >= 1.0:
        cert = contraction_certificate(U)
        return ContractionCertificate(cert.w, cert.alpha, False, rho)
    t = rho + slack * (1.0 - rho)
    inv_w = np.linalg.solve(t * np.eye(N) - J, np.ones(N))
    w = 1.0 / inv_w
    w = w / np.min(w)
    cert = contraction_certificate(U, w)
    return ContractionCertificate(cert.w, cert.alpha, cert.dominant, rho)


def strong_monotonicity(game: QuadGame) -> float:
    """Smallest eigenvalue of the symmetric part of the game Jacobian (may be <= 0)."""
    A = game.stacked_matrix()
    return float(np.min(np.linalg.eigvalsh(0.5 * (A + A.T))))


def _coupling_sums(game: QuadGame) -> np.ndarray:
    U = condensed_matrix(game).matrix
    return U.sum(axis=1) - np.diag(U)


def perturb_proximal(game: QuadGame, alpha_bar: float, x_bar=None) -> QuadGame:
    """Add ``eta_v/2 ||x^v - x_bar^v||^2`` to every cost so unit-weight dominance
    holds with modulus at most ``alpha_bar``."""
    if not 0 < alpha_bar < 1:
        raise ValueError("alpha_bar must lie in (0, 1)")
    mu = strong_monotonicity(game)
    if mu <= 0:
        raise CertificateError(f"game is not strongly monotone (mu = {mu:.6g})")
    x_bar = np.zeros(game.n) if x_bar is None else np.asarray(x_bar, dtype=float)
    eta = np.maximum(_coupling_sums(game) / alpha_bar - mu, 0.0)
    xb = game.split(x_bar)
    N = game.n_players
    Q = [[game.Q[v][u] + (eta[v] * np.eye(game.dims[v]) if u == v else 0.0) for u in range(N)]
         for v in range(N)]
    c = [game.c[v] - eta[v] * xb[v] for v in range(N)]
    const = [game.const[v] + 0.5 * eta[v] * float(xb[v] @ xb[v]) for v in range(N)]
    return game.replace(Q=Q, c=c, const=const)


def perturb_curvature(game: QuadGame, alpha_bar: float, x_bar=None) -> QuadGame:
    """Scale every own block by ``1 + rho_v``.

    For quadratic costs the own Hessian does not depend on the reference
    point, so ``x_bar`` is accepted only for interface symmetry.
    """
    if not 0 < alpha_bar < 1:
        raise ValueError("alpha_bar must lie in (0, 1)")
    mu = strong_monotonicity(game)
    if mu <= 0:
        raise CertificateError(f"game is not strongly monotone (mu = {mu:.6g})")
    rho = np.maximum(_coupling_sums(game) / (alpha_bar * mu) - 1.0, 0.0)
    N = game.n_players
    Q = [[game.Q[v][u] * (1.0 + rho[v]) if u == v else game.Q[v][u] for u in range(N)]
         for v in range(N)]
    return game.replace(Q=Q)


def _integer_bounds(game, v) -> bool:
    ni = game.int_counts[v]
    lo, hi = game.lower[v][:ni], game.upper[v][:ni]
    return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
                and np.all(lo == np.round(lo)) and np.all(hi == np.round(hi)))


def _own_separable(game, v) -> bool:
    ni = game.int_counts[v]
    Qvv = game.Q[v][v]
    top = Qvv[:ni, :ni]
    return (np.all(top == np.diag(np.diag(top)))
            and not np.any(Qvv[:ni, ni:]) and not np.any(Qvv[ni:, :ni]))


def beta_certificate(game: QuadGame, basis: str = "auto", beta: float | None = None) -> DiscreteGapCertificate:
    """Discrete-gap constant from the game structure.

    ``basis`` is ``"general"`` (half the square root of the own-block condition
    number), ``"separable"`` (1), ``"quadratic-separable"`` (1/2), ``"user"``
    (trust ``beta``) or ``"auto"`` (the tightest basis whose preconditions hold).
    """
    players = [v for v in range(game.n_players) if game.int_counts[v] > 0]
    if not players:
        raise CertificateError("no integer variables: the discrete-gap bound is vacuous")
    if basis == "user":
        if beta is None or beta <= 0:
            raise ValueError("a user-supplied beta must be positive")
        return DiscreteGapCertificate(float(beta), "user")
    if basis == "auto":
        for b in ("quadratic-separable", "separable", "general"):
            try:
                return beta_certificate(game, b)
            except CertificateError:
                continue
        raise CertificateError("no discrete-gap basis applies to this game")

    for v in players:
        if not integer_box_only(game, v):
            raise CertificateError(f"player {v}: linear constraints involve integer coordinates")
    if basis == "general":
        for v in players:
            if not _integer_bounds(game, v):
                raise CertificateError(f"player {v}: integer coordinates need integer bounds")
        eigs = [np.linalg.eigvalsh(game.Q[v][v]) for v in players]
        L = float(max(e[-1] for e in eigs))
        sigma = float(min(e[0] for e in eigs))
        if sigma <= 0:
            raise CertificateError("own blocks must be positive definite")
        return DiscreteGapCertificate(0.5 * math.sqrt(L / sigma), "general", L, sigma)
    if basis in ("separable", "quadratic-separable"):
        for v in players:
            if not _own_separable(game, v):
                raise CertificateError(f"player {v}: integer coordinates are not separable in the cost")
            ni = game.int_counts[v]
            if not (np.all(np.isfinite(game.lower[v][:ni])) and np.all(np.isfinite(game.upper[v][:ni]))):
                raise CertificateError(f"player {v}: integer coordinates need finite bounds")
        if basis == "separable":
            return DiscreteGapCertificate(1.0, "separable")
        for v in players:
            ni = game.int_counts[v]
            if not _integer_bounds(game, v):
                raise CertificateError(f"player {v}: integer coordinates need integer bounds")
            if np.any(np.diag(game.Q[v][v])[:ni] <= 0):
                raise CertificateError(f"player {v}: integer curvatures must be positive")
        return DiscreteGapCertificate(0.5, "quadratic-separable")
    raise ValueError(f"unknown basis {basis!r}")


def max_weighted_sqrt_int(w, int_counts) -> float:
    return float(max(wv * math.sqrt(i) for wv, i in zip(w, int_counts)))


def _lattice_ball(center, radius, lo, hi):
    """Yield integer points of the box within Euclidean ``radius`` of
    ``center``, nearest values first along each coordinate."""
    k = center.shape[0]
    r2 = radius * radius + 1e-12

    def values(j, budget):
        span = math.sqrt(budget)
        a = max(math.ceil(center[j] - span - 1e-12), int(lo[j]))
        b = min(math.floor(center[j] + span + 1e-12), int(hi[j]))
        return sorted(range(a, b + 1), key=lambda z: (abs(z - center[j]), z))

    def rec(j, prefix, used):
        if j == k:
            yield np.array(prefix, dtype=float)
            return
        for z in values(j, r2 - used):
            yield from rec(j + 1, prefix + [z], used + (z - center[j]) ** 2)

    yield from rec(0, [], 0.0)


def existence_certificate(game: QuadGame, x_bar, alpha: float, beta: float, w=None,
                          max_candidates: int = 1_000_000, exhaustive: bool = True) -> ExistenceCertificate:
    """Check whether the ball of radius ``beta/(1-alpha) max_v w_v sqrt(i_v)``
    around the relaxed equilibrium pins every integer coordinate.

    A lattice point counts as a candidate for player ``v`` when some point of
    ``X_v`` with exactly those integer coordinates lies within ``R / w_v`` of
    ``x_bar^v``. With ``exhaustive=False`` the search per player stops at the
    second candidate, which already rules certification out.
    """
    N = game.n_players
    w = np.ones(N) if w is None else np.asarray(w, dtype=float)
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    scale = max_weighted_sqrt_int(w, game.int_counts)
    if scale <= 0:
        raise CertificateError("no integer variables")
    R = beta / (1.0 - alpha) * scale
    xb = game.split(x_bar)
    counts, chosen, all_cands = [], [], []
    complete = True
    for v in range(N):
        ni = game.int_counts[v]
        if ni == 0:
            counts.append(0)
            chosen.append(np.zeros(0))
            all_cands.append([])
            continue
        r = R / w[v]
        lo = np.ceil(game.lower[v][:ni] - 1e-9)
        hi = np.floor(game.upper[v][:ni] + 1e-9)
        limit = max_candidates + 1 if exhaustive else 2
        found = []
        for z in _lattice_ball(xb[v][:ni], r, lo, hi):
            lo_f = np.array(game.lower[v], copy=True)
            hi_f = np.array(game.upper[v], copy=True)
            lo_f[:ni] = hi_f[:ni] = z
            proj = solve_qp(np.eye(game.dims[v]), -xb[v], lo_f, hi_f,
                            game.A[v], game.b[v], game.E[v], game.d[v])
            if proj.status == "infeasible":
                continue
            if np.linalg.norm(proj.x - xb[v]) <= r + 1e-9:
                found.append(z)
                if len(found) >= limit:
                    break
        if exhaustive and len(found) > max_candidates:
            raise RuntimeError(f"player {v}: more than {max_candidates} lattice candidates")
        if not exhaustive and len(found) >= 2:
            complete = False
        counts.append(len(found))
        chosen.append(found[0] if len(found) == 1 else None)
        all_cands.append(found)
    certified = all(counts[v] == 1 for v in range(N) if game.int_counts[v] > 0)
    return ExistenceCertificate(certified, R, counts, chosen if certified else None,
                                complete, all_cands)
