"""Convergence radii and iteration caps for best-response iterations.

Every radius scales with ``max_v w_v sqrt(i_v)``; every cap has the form
``h * ceil(log_base(ratio))`` for the revisit period ``h``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .certify import max_weighted_sqrt_int
from .game import block_norm

__all__ = [
    "BoundReport", "check_gamma",
    "radius_thm1", "radius_thm3", "radius_thm4", "radius_inexact",
    "cap_thm1", "cap_thm2", "cap_thm3", "cap_thm4", "cap_inexact",
    "bound_report",
]

# guards ceil() against log ratios that land a few ulps above an integer
_CEIL_GUARD = 1e-9


def _ceil(t: float) -> int:
    return int(math.ceil(t - _CEIL_GUARD))


def check_gamma(alpha: float, gamma: float) -> None:
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    upper = math.inf if alpha == 0 else 1.0 / alpha
    if not 1.0 < gamma < upper:
        raise ValueError(f"gamma must lie in (1, 1/alpha) = (1, {upper:.6g}), got {gamma}")


def _scale(w, int_counts) -> float:
    s = max_weighted_sqrt_int(w, int_counts)
    if s <= 0:
        raise ValueError("radii need at least one integer variable")
    return s


def radius_thm1(alpha, beta, w, int_counts, gamma):
    """Region around every equilibrium reached by the mixed-integer iterates,
    and the limit bound for their cluster points."""
    check_gamma(alpha, gamma)
    s = _scale(w, int_counts)
    return (2 * beta * gamma / (1 - gamma * alpha) * s, 2 * beta / (1 - alpha) * s)


def radius_thm3(alpha, beta, w, int_counts, gamma):
    """Same as :func:`radius_thm1` for the relaxed iterates, with half the size."""
    check_gamma(alpha, gamma)
    s = _scale(w, int_counts)
    return (beta * gamma / (1 - gamma * alpha) * s, beta / (1 - alpha) * s)


def radius_thm4(alpha, beta, w, int_counts, gamma):
    """Distance of mixed-integer iterates to the relaxed equilibrium; shares the
    formulas of :func:`radius_thm3`."""
    return radius_thm3(alpha, beta, w, int_counts, gamma)


def radius_inexact(alpha, beta, w, int_counts, gamma, epsilon):
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    check_gamma(alpha, gamma)
    s = max(wv * (2 * beta * math.sqrt(i) + epsilon) for wv, i in zip(w, int_counts))
    if s <= 0:
        raise ValueError("radius is zero: no integer variables and epsilon = 0")
    return (gamma / (1 - gamma * alpha) * s, s / (1 - alpha))


def _log_cap(gamma, h, ratio):
    return h * _ceil(math.log(max(ratio, gamma)) / math.log(gamma))


def cap_thm1(alpha, beta, w, int_counts, gamma, h, dist0):
    """Iterations after which the mixed-integer iterates are inside the
    :func:`radius_thm1` region. ``dist0`` bounds ``max_v w_v ||x0^v - x*^v||``."""
    if dist0 is None or not math.isfinite(dist0):
        raise ValueError("cap needs a finite initial distance bound")
    check_gamma(alpha, gamma)
    return _log_cap(gamma, h, (1 - gamma * alpha) * dist0 / (2 * beta * _scale(w, int_counts)))


def cap_thm3(alpha, beta, w, int_counts, gamma, h, dist0):
    if dist0 is None or not math.isfinite(dist0):
        raise ValueError("cap needs a finite initial distance bound")
    check_gamma(alpha, gamma)
    return _log_cap(gamma, h, (1 - gamma * alpha) * dist0 / (beta * _scale(w, int_counts)))


def cap_thm4(alpha, beta, w, int_counts, gamma, h, dist0):
    """Same formula as :func:`cap_thm3`, with ``dist0`` measured to the relaxed
    equilibrium."""
    return cap_thm3(alpha, beta, w, int_counts, gamma, h, dist0)


def cap_inexact(alpha, beta, w, int_counts, gamma, h, dist0, epsilon):
    check_gamma(alpha, gamma)
    s = max(wv * (2 * beta * math.sqrt(i) + epsilon) for wv, i in zip(w, int_counts))
    return _log_cap(gamma, h, (1 - gamma * alpha) * dist0 / s)


def cap_thm2(alpha, w, h, x0, x_bar, epsilon, dims=None):
    """Relaxed iterations after which the block-norm error is at most ``epsilon``.

    ``x0`` and ``x_bar`` are flat vectors split by ``dims``, or block lists.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if dims is None:
        diff = [np.asarray(a, float) - np.asarray(b, float) for a, b in zip(x0, x_bar)]
        dist = block_norm(w, diff)
    else:
        dist = block_norm(w, np.asarray(x0, float) - np.asarray(x_bar, float), dims)
    return cap_thm2_from_distance(alpha, h, dist, epsilon)


def cap_thm2_from_distance(alpha, h, dist, epsilon):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    ratio = min(epsilon / dist, 1.0) if dist > 0 else 1.0
    if ratio >= 1.0:
        return 0
    if alpha == 0:
        return h
    return h * _ceil(math.log(ratio) / math.log(alpha))


@dataclass
class BoundReport:
    alpha: float
    beta: float
    w: list
    gamma: float
    h: int
    epsilon_inexact: float
    scale: float
    radius_thm1: float
    radius_thm1_cluster: float
    radius_thm3: float
    radius_thm3_cluster: float
    radius_inexact: float
    radius_inexact_cluster: float
    dist0: float | None = None
    dist0_relaxed: float | None = None
    cap_thm1: int | None = None
    cap_thm3: int | None = None
    cap_thm4: int | None = None
    cap_inexact: int | None = None
    cap_thm2: int | None = None
    epsilon_relaxed: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(alpha, beta, w, int_counts, gamma=1.001, h=1, epsilon_inexact=0.0,
                 dist0=None, dist0_relaxed=None, epsilon_relaxed=None) -> BoundReport:
    """All radii, plus every cap whose distance input is available.

    ``dist0`` bounds the initial distance to the equilibrium set (used by the
    mixed and relaxed caps), ``dist0_relaxed`` is the initial block-norm
    distance to the relaxed equilibrium (used by the relaxed-accuracy cap and
    the distance-to-relaxed cap).
    """
    w = [float(x) for x in w]
    r1 = radius_thm1(alpha, beta, w, int_counts, gamma)
    r3 = radius_thm3(alpha, beta, w, int_counts, gamma)
    ri = radius_inexact(alpha, beta, w, int_counts, gamma, epsilon_inexact)
    rep = BoundReport(alpha, beta, w, gamma, h, epsilon_inexact, _scale(w, int_counts),
                      r1[0], r1[1], r3[0], r3[1], ri[0], ri[1], dist0, dist0_relaxed)
    if dist0 is not None and math.isfinite(dist0):
        rep.cap_thm1 = cap_thm1(alpha, beta, w, int_counts, gamma, h, dist0)
        rep.cap_thm3 = cap_thm3(alpha, beta, w, int_counts, gamma, h, dist0)
        rep.cap_inexact = cap_inexact(alpha, beta, w, int_counts, gamma, h, dist0, epsilon_inexact)
    if dist0_relaxed is not None:
        rep.cap_thm4 = cap_thm4(alpha, beta, w, int_counts, gamma, h, dist0_relaxed)
        if epsilon_relaxed is not None:
            rep.epsilon_relaxed = epsilon_relaxed
            rep.cap_thm2 = cap_thm2_from_distance(alpha, h, dist0_relaxed, epsilon_relaxed)
    return rep


def box_diameters(game) -> np.ndarray:
    """Upper bound on each player's set diameter from its box (inf if unbounded)."""
    return np.array([float(np.linalg.norm(game.upper[v] - game.lower[v]))
                     for v in range(game.n_players)])
