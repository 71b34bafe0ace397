"""Seeded random games shared by the test modules."""
import numpy as np

from minep import QuadGame


def _spd(rng, n, lo=1.0, hi=3.0):
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return U @ np.diag(rng.uniform(lo, hi, size=n)) @ U.T


def _coupling(rng, dims, own_min, target):
    """Off-diagonal blocks scaled so every unit-weight row ratio is ``target``."""
    N = len(dims)
    Q = [[None] * N for _ in range(N)]
    for v in range(N):
        blocks = {u: rng.normal(size=(dims[v], dims[u])) for u in range(N) if u != v}
        total = sum(np.linalg.norm(b, 2) for b in blocks.values())
        for u, b in blocks.items():
            Q[v][u] = b * (target * own_min[v] / total) if total > 0 else b
    return Q


def dominant_continuous_game(rng, max_players=4, max_dim=3, alpha=None, box=None):
    """Continuous game that is unit-weight dominant with ratio ``alpha``."""
    N = int(rng.integers(2, max_players + 1))
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(N)]
    alpha = float(rng.uniform(0.3, 0.9)) if alpha is None else alpha
    own = [_spd(rng, n) for n in dims]
    sig = [float(np.linalg.eigvalsh(q)[0]) for q in own]
    Q = _coupling(rng, dims, sig, alpha)
    for v in range(N):
        Q[v][v] = own[v]
    lower = upper = None
    if box is not None:
        lower = [np.full(n, -box) for n in dims]
        upper = [np.full(n, box) for n in dims]
    return QuadGame(dims=dims, int_counts=[0] * N, Q=Q,
                    c=[rng.normal(size=n) * 3 for n in dims], lower=lower, upper=upper,
                    name="random-dominant")


def separable_mixed_game(rng, max_players=3, max_dim=4, int_bound=3, alpha=None):
    """Integer coordinates enter each own cost through separate positive
    quadratics and integer box bounds only; continuous coordinates get their
    own SPD block, a box and one linear inequality."""
    N = int(rng.integers(2, max_players + 1))
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(N)]
    ints = [int(rng.integers(1, n + 1)) for n in dims]
    alpha = float(rng.uniform(0.2, 0.9)) if alpha is None else alpha
    own = []
    for n, i in zip(dims, ints):
        q = np.zeros((n, n))
        q[:i, :i] = np.diag(rng.uniform(1.0, 3.0, size=i))
        if n > i:
            q[i:, i:] = _spd(rng, n - i)
        own.append(q)
    sig = [float(np.linalg.eigvalsh(q)[0]) for q in own]
    Q = _coupling(rng, dims, sig, alpha)
    for v in range(N):
        Q[v][v] = own[v]
    lower, upper, A, b = [], [], [], []
    for n, i in zip(dims, ints):
        lower.append(np.concatenate([np.full(i, -float(int_bound)), np.full(n - i, -5.0)]))
        upper.append(np.concatenate([np.full(i, float(int_bound)), np.full(n - i, 5.0)]))
        row = np.zeros((1, n))
        if n > i:
            row[0, i:] = rng.normal(size=n - i)
        A.append(row)
        b.append(np.array([2.0]))
    return QuadGame(dims=dims, int_counts=ints, Q=Q, c=[rng.normal(size=n) * 3 for n in dims],
                    lower=lower, upper=upper, A=A, b=b, name="random-separable")


def integer_game(rng, max_points=10_000):
    """All-integer, unit-weight dominant game whose lattice has at most ``max_points`` points."""
    while True:
        N = int(rng.integers(2, 4))
        dims = [int(rng.integers(1, 3)) for _ in range(N)]
        bound = int(rng.integers(1, 4))
        if (2 * bound + 1) ** sum(dims) <= max_points:
            break
    own = [_spd(rng, n) for n in dims]
    sig = [float(np.linalg.eigvalsh(q)[0]) for q in own]
    Q = _coupling(rng, dims, sig, float(rng.uniform(0.2, 0.9)))
    for v in range(N):
        Q[v][v] = own[v]
    return QuadGame(dims=dims, int_counts=dims, Q=Q, c=[rng.normal(size=n) * 2 for n in dims],
                    lower=[np.full(n, -float(bound)) for n in dims],
                    upper=[np.full(n, float(bound)) for n in dims], name="random-integer")


def mixed_game(rng):
    """Small mixed game (one integer and up to two continuous coordinates per
    player) with general own blocks, integer bounds and a coupling-free box."""
    N = int(rng.integers(2, 4))
    dims = [int(rng.integers(2, 4)) for _ in range(N)]
    ints = [1] * N
    own = [_spd(rng, n) for n in dims]
    sig = [float(np.linalg.eigvalsh(q)[0]) for q in own]
    Q = _coupling(rng, dims, sig, float(rng.uniform(0.2, 0.7)))
    for v in range(N):
        Q[v][v] = own[v]
    return QuadGame(dims=dims, int_counts=ints, Q=Q, c=[rng.normal(size=n) * 2 for n in dims],
                    lower=[np.concatenate([[-3.0], np.full(n - 1, -4.0)]) for n in dims],
                    upper=[np.concatenate([[3.0], np.full(n - 1, 4.0)]) for n in dims],
                    name="random-mixed")


def random_point(rng, game, integer=True):
    """Uniform point of the box (integers rounded), finite boxes only."""
    x = rng.uniform(np.concatenate(game.lower), np.concatenate(game.upper))
    if integer:
        mask = game.int_mask()
        x[mask] = np.round(x[mask])
    return x
