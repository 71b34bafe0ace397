"""Command line entry point: ``minep <subcommand> ...``.

Exit codes: 0 success (or converged), 3 cycle detected, 4 iteration cap
reached, 1 any error. ``--json`` output is byte-identical for identical
arguments.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import io
from .bounds import bound_report, box_diameters
from .certify import CertificateError, beta_certificate, existence_certificate
from .estimators import GameCertifier
from .fixtures import FIXTURES, load_fixture
from .game import block_norm, validate
from .iterate import relaxed_start, rounded_start, run_continuous, run_mixed
from .oracle import enumerate_equilibria
from .smart_building import BuildingParams, generate_instance, run_comparison

EXIT_OK, EXIT_ERROR, EXIT_CYCLE, EXIT_MAX_ITER = 0, 1, 3, 4
STOP_CODES = {"converged": EXIT_OK, "cycle-detected": EXIT_CYCLE, "max-iter": EXIT_MAX_ITER}

# documented starting points of the fixtures that need one
FIXTURE_STARTS = {"example-1": [-1.0, 1.0]}

SCHEDULES = {"jacobi": "jacobi", "gs": "gauss-seidel", "gauss-seidel": "gauss-seidel"}


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _param(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    vals = _floats(val)
    return key.strip(), vals[0] if len(vals) == 1 else tuple(vals)


def _add_game_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=sorted(FIXTURES))
    src.add_argument("--game", metavar="PATH", help="JSON game document")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                   help="fixture parameter, e.g. eps=0.05 or eta=0.3,0.3 (repeatable)")


def _add_iter_args(p, max_iter, step_tol):
    p.add_argument("--schedule", choices=sorted(SCHEDULES), default="gs")
    p.add_argument("--max-iter", type=int, default=max_iter)
    p.add_argument("--step-tol", type=float, default=step_tol)
    p.add_argument("--x0", type=_floats, help="comma separated start, e.g. --x0=-1,1")
    p.add_argument("--trace", action="store_true", help="include every iterate in the output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minep", description="Best-response iterations, certificates and brute-force oracles "
                                  "for quadratic mixed-integer Nash games.")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--seed", type=int, default=0, help="seed for generated instances")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the game invariants")
    _add_game_args(p)

    p = sub.add_parser("certify", help="condensed matrix, contraction, discrete gap, monotonicity")
    _add_game_args(p)
    p.add_argument("--weights", type=_floats, help="test these weights instead of searching")

    p = sub.add_parser("solve-relaxed", help="best-response iteration on the continuous relaxation")
    _add_game_args(p)
    _add_iter_args(p, 1000, 1e-10)

    p = sub.add_parser("solve", help="mixed-integer best-response iteration")
    _add_game_args(p)
    _add_iter_args(p, 60, 1e-6)
    p.add_argument("--epsilon", type=float, default=0.0, help="inexact best-response tolerance")
    p.add_argument("--node-limit", type=int, default=200_000)

    p = sub.add_parser("bounds", help="radii and iteration caps")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--fixture", choices=sorted(FIXTURES))
    src.add_argument("--game", metavar="PATH")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--w", type=_floats, help="player weights")
    p.add_argument("--i", dest="int_counts", type=_ints, help="integer counts per player")
    p.add_argument("--gamma", type=float, default=1.001)
    p.add_argument("--h", type=int, default=1, help="revisit period")
    p.add_argument("--dist0", type=float, help="initial distance to the equilibrium set")
    p.add_argument("--dist0-relaxed", type=float, help="initial distance to the relaxed equilibrium")
    p.add_argument("--epsilon", type=float, default=0.0, help="inexact best-response tolerance")
    p.add_argument("--epsilon-relaxed", type=float, help="accuracy target for the relaxed cap")

    p = sub.add_parser("existence", help="does the relaxed solution pin every integer?")
    _add_game_args(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("oracle", help="enumerate every equilibrium of a small game")
    _add_game_args(p)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("smartbuild-gen", help="write one smart-building game document")
    _add_building_args(p)
    p.add_argument("--index", type=int, default=0, help="instance index within the seeded batch")
    p.add_argument("-o", "--output", metavar="PATH")

    p = sub.add_parser("smartbuild-run", help="direct vs two-phase comparison on seeded instances")
    _add_building_args(p)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--procedures", default="direct,two-phase")
    p.add_argument("--schedules", default="jacobi,gs")
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--step-tol", type=float, default=1e-6)
    p.add_argument("--gamma", type=float, default=1.001)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", metavar="PATH", help="also write the per-run CSV here")
    p.add_argument("--with-timing", action="store_true", help="keep wall-clock fields in JSON")
    return parser


def _add_building_args(p):
    p.add_argument("--users", type=int, default=4)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--granularity", choices=("tens", "units"), default="tens")


def _load(args):
    params = dict(args.param)
    if args.fixture:
        return load_fixture(args.fixture, **params), args.fixture
    if params:
        raise ValueError("--param only applies to --fixture")
    return io.load_game(args.game), None


def _start(args, game, fixture):
    if args.x0 is not None:
        return np.asarray(args.x0, dtype=float)
    if fixture in FIXTURE_STARTS:
        return np.asarray(FIXTURE_STARTS[fixture], dtype=float)
    return None


def _trace_out(trace, full):
    out = {"stop_reason": trace.stop_reason, "iterations": trace.iterations,
           "final": trace.final, "schedule": trace.schedule, "h": trace.h}
    if trace.cycle is not None:
        out["cycle"] = trace.cycle
    if full:
        out["points"] = trace.points
        out["steps"] = trace.steps
    return out


def cmd_validate(args):
    game, _ = _load(args)
    issues = validate(game)
    return {"valid": not issues, "diagnostics": issues}, EXIT_OK if not issues else EXIT_ERROR


def cmd_certify(args):
    game, _ = _load(args)
    est = GameCertifier(weights="search" if args.weights is None else args.weights).fit(game)
    unit = GameCertifier(weights="unit").fit(game)
    out = {
        "upsilon": est.upsilon_,
        "unit_weights": {"alpha": unit.alpha_, "dominant": unit.dominant_},
        "weights": {"w": est.w_, "alpha": est.alpha_, "dominant": est.dominant_,
                    "spectral_radius": est.spectral_radius_},
        "mu": est.mu_,
        "beta": None if est.gap_ is None else {"beta": est.beta_, "basis": est.gap_.basis,
                                               "L": est.gap_.L, "sigma": est.gap_.sigma},
    }
    return out, EXIT_OK


def cmd_solve_relaxed(args):
    game, fixture = _load(args)
    relaxed = game.replace(int_counts=(0,) * game.n_players)
    x0 = _start(args, game, fixture)
    x0 = relaxed_start(game) if x0 is None else x0
    trace = run_continuous(relaxed, x0, SCHEDULES[args.schedule], args.max_iter, args.step_tol)
    return _trace_out(trace, args.trace), STOP_CODES[trace.stop_reason]


def cmd_solve(args):
    game, fixture = _load(args)
    x0 = _start(args, game, fixture)
    if x0 is None:
        relaxed = game.replace(int_counts=(0,) * game.n_players)
        x_bar = run_continuous(relaxed, relaxed_start(game), "jacobi", 1000, 1e-10).final
        x0 = rounded_start(game, x_bar)
    trace = run_mixed(game, x0, SCHEDULES[args.schedule], args.max_iter, args.step_tol,
                      args.epsilon, node_limit=args.node_limit)
    return _trace_out(trace, args.trace), STOP_CODES[trace.stop_reason]


def cmd_bounds(args):
    alpha, beta, w, counts = args.alpha, args.beta, args.w, args.int_counts
    dist0, dist0_rel = args.dist0, args.dist0_relaxed
    if args.fixture or args.game:
        game, _ = _load(args)
        cert = GameCertifier().fit(game)
        alpha = cert.alpha_ if alpha is None else alpha
        beta = cert.beta_ if beta is None else beta
        w = list(cert.w_) if w is None else w
        counts = list(game.int_counts) if counts is None else counts
        if dist0 is None:
            dist0 = block_norm(w, box_diameters(game), [1] * game.n_players)
    if alpha is None or beta is None or counts is None:
        raise ValueError("bounds needs --alpha, --beta and --i, or a game to derive them from")
    w = [1.0] * len(counts) if w is None else w
    rep = bound_report(alpha, beta, w, counts, args.gamma, args.h, args.epsilon,
                       dist0=dist0, dist0_relaxed=dist0_rel, epsilon_relaxed=args.epsilon_relaxed)
    return rep.to_dict(), EXIT_OK


def cmd_existence(args):
    game, _ = _load(args)
    cert = GameCertifier().fit(game)
    if not cert.dominant_:
        raise CertificateError("no dominating weights: existence cannot be certified")
    alpha = cert.alpha_ if args.alpha is None else args.alpha
    beta = args.beta
    if beta is None:
        beta = beta_certificate(game).beta
    relaxed = game.replace(int_counts=(0,) * game.n_players)
    x_bar = run_continuous(relaxed, relaxed_start(game), "jacobi", 20_000, 1e-13).final
    ex = existence_certificate(game, x_bar, alpha, beta, cert.w_)
    out = {"certified": ex.certified, "relaxed_solution": x_bar, "alpha": alpha, "beta": beta,
           "w": cert.w_, "radius": ex.radius_used, "candidates_found": ex.candidates_found,
           "fixed_integers": ex.fixed_integers}
    return out, EXIT_OK


def cmd_oracle(args):
    game, _ = _load(args)
    res = enumerate_equilibria(game, args.budget, args.tol)
    return {"equilibria": res.points, "count": len(res), "exhaustive": res.exhaustive,
            "assignments_checked": res.assignments_checked}, EXIT_OK


def _building_params(args):
    return BuildingParams(n_users=args.users, horizon=args.horizon,
                          granularity=args.granularity, seed=args.seed)


def cmd_smartbuild_gen(args):
    params = _building_params(args)
    game = generate_instance(params, args.index)
    doc = io.GameDocument(game, certificates={"building_params": params.to_dict(),
                                              "index": args.index})
    if args.output:
        io.save(doc, args.output)
        return {"written": args.output, "dims": list(game.dims),
                "int_counts": list(game.int_counts)}, EXIT_OK
    return io.document_to_dict(doc), EXIT_OK


def cmd_smartbuild_run(args):
    params = _building_params(args)
    schedules = [SCHEDULES[s.strip()] for s in args.schedules.split(",") if s.strip()]
    procedures = [p.strip() for p in args.procedures.split(",") if p.strip()]
    report = run_comparison(params, args.instances, procedures, schedules, n_jobs=args.jobs,
                            max_iter=args.max_iter, step_tol=args.step_tol, gamma=args.gamma)
    if args.csv:
        report.to_csv(args.csv)
    return report.to_dict(include_timing=args.with_timing), EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "certify": cmd_certify, "solve-relaxed": cmd_solve_relaxed,
    "solve": cmd_solve, "bounds": cmd_bounds, "existence": cmd_existence, "oracle": cmd_oracle,
    "smartbuild-gen": cmd_smartbuild_gen, "smartbuild-run": cmd_smartbuild_run,
}


def _print_text(obj, indent=0):
    pad = "  " * indent
    for key, val in obj.items():
        if isinstance(val, dict):
            print(f"{pad}{key}:")
            _print_text(val, indent + 1)
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            print(f"{pad}{key}: {len(val)} entries")
        else:
            print(f"{pad}{key}: {_fmt(val)}")


def _fmt(val):
    if isinstance(val, float):
        return "inf" if math.isinf(val) else f"{val:.10g}"
    if isinstance(val, list):
        return "[" + ", ".join(_fmt(v) for v in val) + "]"
    return str(val)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out, code = COMMANDS[args.command](args)
    except (ValueError, KeyError, CertificateError, RuntimeError, OSError) as exc:
        print(f"minep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.json:
        sys.stdout.write(io.dumps(out))
    else:
        _print_text(io.to_jsonable(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
