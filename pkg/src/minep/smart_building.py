"""Smart-building appliance scheduling game and the direct vs relax-then-fix
comparison harness.

Each user ``v`` with ``m`` appliances over ``T`` slots controls
``z = (delta, u, y)``: integer utilization levels ``delta_h(k)``, grid
purchases ``u(k)`` and appliance consumption proxies ``y_h(k)``. Slot ``k``
and appliance ``h`` map to position ``k * m + h`` inside the delta and y
sub-blocks. Cost per user::

    sum_k kappa u(k)^2 + chi sum_h delta_h(k)^2 + p(k) a(k) u(k)
          + c sum_h (y_h(k) - delta_h(k) ubar_h)^2,     a(k) = sum_users u(k)

With tens granularity the integer variable is ``delta / 10`` so every
integer coordinate ranges over ``0..10``.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import radius_thm4, cap_thm4
from .certify import (ContractionCertificate, DiscreteGapCertificate,
                      beta_certificate, condensed_matrix, contraction_certificate,
                      max_weighted_sqrt_int)
from .game import QuadGame, block_norm, validate
from .br import BranchCache
from .iterate import relaxed_start, rounded_start, run_continuous, run_mixed, solve_two_phase
from .oracle import verify_equilibrium
from .qp import find_feasible_point, solve_qp

__all__ = ["BuildingParams", "BuildingData", "ExperimentReport", "sample_instance", "build_game",
           "generate_instance", "instance_data", "certify_instance", "simulate_soc", "direct_start",
           "reduce_to_ball", "run_instance", "run_comparison", "PROCEDURES"]

log = logging.getLogger(__name__)

PROCEDURES = ("direct", "two-phase", "two-phase-reduced")
FULL_SCALE = 100  # largest utilization level


@dataclass
class BuildingParams:
    n_users: int = 4
    horizon: int = 4
    granularity: str = "tens"           # "units" (0..100) or "tens" (0, 10, .., 100)
    appliances: tuple = (2, 4)          # inclusive range for m
    u_max: float = 1.2
    soc0: float = 0.0
    eta: float = 1.0                    # charging efficiency
    xi: float = 0.5                     # discharging efficiency
    c_mean: float = 600.0
    c_var: float = 200.0
    chi_ratio: float = 0.01             # chi = c * chi_ratio
    kappa_mean: float = 6.0
    kappa_var: float = 0.2
    price_day_numerator: float = 0.6    # day mean = numerator / (N u_max)
    price_night_numerator: float = 0.4
    price_var: float = 1e-2
    price_floor: float = 1e-3
    energy_range: tuple = (1.2, 2.0)
    cap_factor: float = 1.2             # delivery cap = cap_factor * max required energy
    seed: int = 0

    @classmethod
    def full_scale(cls, **kw) -> "BuildingParams":
        warnings.warn("full-scale instances need minutes per branch-and-bound sweep",
                      RuntimeWarning, stacklevel=2)
        base = dict(n_users=8, horizon=6, granularity="units")
        base.update(kw)
        return cls(**base)

    @property
    def scale(self) -> int:
        return {"units": 1, "tens": 10}[self.granularity]

    @property
    def day_slots(self) -> int:
        return math.ceil(self.horizon / 2)

    def check(self) -> None:
        if self.granularity not in ("units", "tens"):
            raise ValueError("granularity must be 'units' or 'tens'")
        if self.n_users < 1 or self.horizon < 1:
            raise ValueError("n_users and horizon must be positive")
        lo, hi = self.appliances
        if not 1 <= lo <= hi:
            raise ValueError("appliance range must satisfy 1 <= low <= high")
        for name in ("u_max", "eta", "xi", "c_mean", "kappa_mean", "chi_ratio",
                     "price_floor", "cap_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.soc0 < 0:
            raise ValueError("soc0 must be nonnegative")
        if not 0 < self.energy_range[0] <= self.energy_range[1]:
            raise ValueError("energy_range must be positive and ordered")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BuildingData:
    """One draw of every random parameter."""

    params: BuildingParams
    m: list
    kappa: np.ndarray
    c: np.ndarray
    chi: np.ndarray
    price: np.ndarray        # (N, T)
    energy: list             # energy[v][h]
    delivery_cap: np.ndarray


def sample_instance(params: BuildingParams, rng=None) -> BuildingData:
    params.check()
    rng = np.random.default_rng(params.seed) if rng is None else rng
    N, T = params.n_users, params.horizon
    m = [int(k) for k in rng.integers(params.appliances[0], params.appliances[1] + 1, size=N)]
    c = rng.normal(params.c_mean, math.sqrt(params.c_var), size=N)
    kappa = rng.normal(params.kappa_mean, math.sqrt(params.kappa_var), size=N)
    scale = N * params.u_max
    day = rng.normal(params.price_day_numerator / scale, math.sqrt(params.price_var), size=N)
    night = rng.normal(params.price_night_numerator / scale, math.sqrt(params.price_var), size=N)
    # a unit price must stay positive; the normal tails are cut at a small floor
    day, night = np.maximum(day, params.price_floor), np.maximum(night, params.price_floor)
    price = np.where(np.arange(T)[None, :] < params.day_slots, day[:, None], night[:, None])
    energy = [rng.uniform(*params.energy_range, size=k) for k in m]
    cap = np.array([params.cap_factor * float(np.max(e)) for e in energy])
    if np.any(c <= 0) or np.any(kappa <= 0):
        raise ValueError("sampled a nonpositive cost weight; adjust the distributions")
    return BuildingData(params, m, kappa, c, c * params.chi_ratio, price, energy, cap)


def _layout(m, T):
    nd = T * m
    return nd, slice(0, nd), slice(nd, nd + T), slice(nd + T, 2 * nd + T)


def build_game(data: BuildingData) -> QuadGame:
    p = data.params
    N, T, s = p.n_users, p.horizon, p.scale
    dims, ints, Q, lower, upper, A, b, E, d = [], [], [], [], [], [], [], [], []
    for v in range(N):
        m = data.m[v]
        nd, sd, su, sy = _layout(m, T)
        n = 2 * nd + T
        dims.append(n)
        ints.append(nd)
        H = np.zeros((n, n))
        ubar = np.tile(data.energy[v], T)   # energy of the appliance at each (k, h) slot
        di = np.arange(nd)
        yi = sy.start + di
        H[di, di] = 2 * data.chi[v] * s * s + 2 * data.c[v] * (s * ubar) ** 2
        H[yi, yi] = 2 * data.c[v]
        H[di, yi] = H[yi, di] = -2 * data.c[v] * s * ubar
        ui = su.start + np.arange(T)
        H[ui, ui] = 2 * (data.kappa[v] + data.price[v])
        row = []
        for w in range(N):
            if w == v:
                row.append(H)
            else:
                C = np.zeros((n, dims_of(data, w)))
                C[ui, su_of(data, w).start + np.arange(T)] = data.price[v]
                row.append(C)
        Q.append(row)
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        hi[sd] = FULL_SCALE // s
        hi[su] = p.u_max
        lower.append(lo)
        upper.append(hi)
        # task completion: sum_k y_h(k) = 100 ubar_h
        Ev = np.zeros((m, n))
        for h in range(m):
            Ev[h, sy.start + h + m * np.arange(T)] = 1.0
        E.append(Ev)
        d.append(FULL_SCALE * np.asarray(data.energy[v]))
        # state of charge after slot k and per-slot delivery cap
        Av = np.zeros((2 * T, n))
        bv = np.zeros(2 * T)
        for k in range(T):
            Av[k, su.start:su.start + k + 1] = -p.eta
            Av[k, sy.start:sy.start + (k + 1) * m] = p.xi / FULL_SCALE
            bv[k] = p.soc0
            Av[T + k, sy.start + k * m: sy.start + (k + 1) * m] = 1.0
            bv[T + k] = FULL_SCALE * data.delivery_cap[v]
        A.append(Av)
        b.append(bv)
    game = QuadGame(dims=dims, int_counts=ints, Q=Q, c=[np.zeros(n) for n in dims],
                    lower=lower, upper=upper, A=A, b=b, E=E, d=d,
                    name=f"smart-building-{p.granularity}-seed{p.seed}")
    _check_feasible(game, data)
    return game


def dims_of(data, w):
    return 2 * data.params.horizon * data.m[w] + data.params.horizon


def su_of(data, w):
    return _layout(data.m[w], data.params.horizon)[2]


def _check_feasible(game, data):
    T = data.params.horizon
    for v in range(game.n_players):
        if find_feasible_point(game.lower[v], game.upper[v], game.A[v], game.b[v],
                               game.E[v], game.d[v]) is not None:
            continue
        cap_only = game.A[v][T:], game.b[v][T:]
        if find_feasible_point(game.lower[v], game.upper[v], *cap_only, game.E[v], game.d[v]) is None:
            family = "task completion with delivery cap"
        else:
            family = "state of charge"
        raise ValueError(f"user {v}: infeasible parameters ({family} constraints)")


def generate_instance(params: BuildingParams, index: int | None = None) -> QuadGame:
    """Game for ``params.seed`` alone, or for instance ``index`` of a seeded batch."""
    return build_game(instance_data(params, index))


def instance_data(params: BuildingParams, index: int | None = None) -> BuildingData:
    if index is None:
        return sample_instance(params)
    return sample_instance(params, np.random.default_rng(np.random.SeedSequence([params.seed, index])))


def simulate_soc(data: BuildingData, v: int, u, y) -> np.ndarray:
    """State of charge after each slot for user ``v``'s purchases ``u`` and
    consumption proxies ``y`` (flattened slot-major)."""
    p = data.params
    m = data.m[v]
    y = np.asarray(y, float).reshape(p.horizon, m)
    x = [p.soc0]
    for k in range(p.horizon):
        x.append(x[-1] + p.eta * u[k] - p.xi / FULL_SCALE * y[k].sum())
    return np.array(x[1:])


def certify_instance(game: QuadGame) -> tuple[ContractionCertificate, DiscreteGapCertificate]:
    """Unit-weight dominance certificate (reported even when it fails) and the
    condition-number discrete-gap constant."""
    cc = contraction_certificate(condensed_matrix(game))
    if not cc.dominant:
        log.warning("unit weights are not dominating (alpha = %.4g)", cc.alpha)
    return cc, beta_certificate(game, "general")


def direct_start(game: QuadGame) -> np.ndarray:
    """Point of the feasible set closest to the origin (integers are 0 there
    because they only meet box constraints starting at 0)."""
    parts = []
    for v in range(game.n_players):
        n = game.dims[v]
        res = solve_qp(np.eye(n), np.zeros(n), game.lower[v], game.upper[v],
                       game.A[v], game.b[v], game.E[v], game.d[v])
        if res.status == "infeasible":
            raise ValueError(f"player {v}: feasible set is empty")
        xv = res.x.copy()
        ni = game.int_counts[v]
        xv[:ni] = np.round(xv[:ni])
        parts.append(xv)
    return np.concatenate(parts)


def reduce_to_ball(game: QuadGame, x_bar, radius: float, w=None) -> QuadGame:
    """Shrink every integer box to the integers within ``radius / w_v`` of ``x_bar``
    coordinatewise, which contains the block-norm ball of that radius."""
    w = np.ones(game.n_players) if w is None else np.asarray(w, float)
    lower = [np.array(l, copy=True) for l in game.lower]
    upper = [np.array(u, copy=True) for u in game.upper]
    for v, xv in enumerate(game.split(x_bar)):
        ni = game.int_counts[v]
        r = radius / w[v]
        lower[v][:ni] = np.maximum(lower[v][:ni], np.ceil(xv[:ni] - r - 1e-9))
        upper[v][:ni] = np.minimum(upper[v][:ni], np.floor(xv[:ni] + r + 1e-9))
    return game.replace(lower=lower, upper=upper, name=game.name + "|reduced")


@dataclass
class ExperimentReport:
    params: dict
    rows: list = field(default_factory=list)
    instances: list = field(default_factory=list)   # per-instance certificate summary

    def aggregates(self) -> dict:
        out = {}
        for r in self.rows:
            key = f"{r['procedure']}/{r['schedule']}"
            out.setdefault(key, []).append(r)
        agg = {}
        for key, rs in out.items():
            ok = [r for r in rs if r["converged"]]
            agg[key] = {
                "runs": len(rs),
                "converged": len(ok),
                "failure_rate": 1.0 - len(ok) / len(rs) if rs else 0.0,
                "mean_iterations": float(np.mean([r["iterations"] for r in ok])) if ok else None,
                "mean_time_ms": float(np.mean([r["time_ms"] for r in ok])) if ok else None,
                "errors": sum(1 for r in rs if r.get("error")),
            }
        relaxed = [i for i in self.instances if "relaxed_converged" in i]
        agg["relaxed"] = {
            "runs": len(relaxed),
            "converged": sum(1 for i in relaxed if i["relaxed_converged"]),
            "mean_iterations": float(np.mean([i["relaxed_iterations"] for i in relaxed])) if relaxed else None,
        }
        return agg

    def to_dict(self, include_timing: bool = False) -> dict:
        rows = [dict(r) for r in self.rows]
        if not include_timing:
            for r in rows:
                r.pop("time_ms", None)
        agg = self.aggregates()
        if not include_timing:
            for a in agg.values():
                a.pop("mean_time_ms", None)
        return {"params": self.params, "instances": self.instances, "rows": rows,
                "aggregates": agg}

    def to_csv(self, dest=None) -> str:
        from .io import write_csv
        return write_csv(self.rows, dest)


def _containment(trace, x_bar, w, dims, radius, cap):
    """True when every iterate from index ``cap`` on is within ``radius`` of ``x_bar``."""
    return all(block_norm(w, p - x_bar, dims) <= radius + 1e-9 for p in trace.points[cap:])


def run_instance(params: BuildingParams, index: int, procedures=("direct", "two-phase"),
                 schedules=("jacobi", "gauss-seidel"), max_iter: int = 60,
                 step_tol: float = 1e-6, gamma: float = 1.001, verify: bool = True):
    """Generate instance ``index`` of a batch and run every requested
    procedure and schedule on it. Returns (instance summary, rows)."""
    summary = {"instance": index}
    rows = []
    try:
        data = instance_data(params, index)
        game = build_game(data)
        issues = validate(game)
        cc, gap = certify_instance(game)
        w = np.ones(game.n_players)
        summary.update(valid=not issues, issues=issues, alpha=cc.alpha, dominant=cc.dominant,
                       beta=gap.beta, L=gap.L, sigma=gap.sigma, dims=list(game.dims),
                       int_counts=list(game.int_counts))
    except Exception as exc:  # recorded, never aborts the batch
        summary["error"] = f"{type(exc).__name__}: {exc}"
        return summary, rows

    scale = max_weighted_sqrt_int(w, game.int_counts)
    summary["limit_radius"] = gap.beta / (1 - cc.alpha) * scale if cc.dominant else math.inf
    relaxed = game.replace(int_counts=(0,) * game.n_players)
    x_bar = None
    for sched in schedules:
        t0 = time.perf_counter()
        t_rel = run_continuous(relaxed, relaxed_start(game), sched, max_iter=1000, step_tol=1e-10)
        if sched == schedules[0]:
            x_bar = t_rel.final
            summary.update(relaxed_converged=t_rel.converged, relaxed_iterations=t_rel.iterations)
        rows.append(_row(index, "relaxed", sched, t_rel, (time.perf_counter() - t0) * 1e3,
                         None, None))

    radius = cap_k = None
    if cc.dominant and 1 < gamma < (1 / cc.alpha if cc.alpha > 0 else math.inf):
        radius = radius_thm4(cc.alpha, gap.beta, w, game.int_counts, gamma)[0]

    for proc in procedures:
        for sched in schedules:
            t0 = time.perf_counter()
            cache = BranchCache()
            try:
                if proc == "direct":
                    x0 = direct_start(game)
                    target = game
                    trace = run_mixed(game, x0, sched, max_iter, step_tol, w=w, cache=cache)
                elif proc == "two-phase":
                    target = game
                    trace = solve_two_phase(game, sched, max_iter, step_tol, alpha=cc.alpha,
                                            beta=gap.beta, w=w, cache=cache).trace_mixed
                    x0 = trace.points[0]
                elif proc == "two-phase-reduced":
                    target = reduce_to_ball(game, x_bar, summary["limit_radius"], w)
                    x0 = rounded_start(target, x_bar, cache)
                    trace = run_mixed(target, x0, sched, max_iter, step_tol, w=w, cache=cache)
                else:
                    raise ValueError(f"unknown procedure {proc!r}")
                elapsed = (time.perf_counter() - t0) * 1e3
                contained = None
                if radius is not None:
                    dist0 = block_norm(w, x0 - x_bar, game.dims)
                    cap_k = cap_thm4(cc.alpha, gap.beta, w, game.int_counts, gamma, trace.h, dist0)
                    contained = _containment(trace, x_bar, w, game.dims, radius, cap_k)
                row = _row(index, proc, sched, trace, elapsed, radius, contained)
                row["cap"] = cap_k
                if verify and trace.converged:
                    row["verified"] = verify_equilibrium(target, trace.final, tol=1e-6, cache=cache)
            except Exception as exc:
                row = _row(index, proc, sched, None, (time.perf_counter() - t0) * 1e3, radius, None)
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return summary, rows


def _row(index, proc, sched, trace, ms, radius, contained):
    return {"instance": index, "procedure": proc,
            "schedule": "jacobi" if sched.startswith("jacobi") else "gauss-seidel",
            "iterations": trace.iterations if trace is not None else 0,
            "time_ms": ms,
            "converged": bool(trace is not None and trace.converged),
            "stop_reason": trace.stop_reason if trace is not None else "error",
            "radius": radius, "contained": contained}


def _run_one(args):
    return run_instance(*args[0], **args[1])


def run_comparison(params: BuildingParams, n_instances: int = 50,
                   procedures=("direct", "two-phase"), schedules=("jacobi", "gauss-seidel"),
                   n_jobs: int = 1, **kw) -> ExperimentReport:
    """Run the seeded batch; instance ``i`` draws from ``SeedSequence([seed, i])``
    so results do not depend on ``n_jobs``."""
    for proc in procedures:
        if proc not in PROCEDURES:
            raise ValueError(f"unknown procedure {proc!r}; choose from {PROCEDURES}")
    jobs = [((params, i, tuple(procedures), tuple(schedules)), kw) for i in range(n_instances)]
    if n_jobs == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_run_one, jobs))
    report = ExperimentReport(params.to_dict())
    for summary, rows in results:
        report.instances.append(summary)
        report.rows.extend(rows)
    return report
