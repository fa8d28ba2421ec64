"""Command-line front end: ``lqgne {solve,certify,gen,bench,mpc}``.

Exit status is 0 on success (solver statuses such as ``infeasible`` are
reported, not errors), 1 on bad input and 2 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench, gtmpc
from .certify import is_vgne, kkt_residuals
from .errors import DimensionMismatch, InvalidGame
from .game import assemble_pseudogradient
from .goldnash import OPTIMAL, SolverOptions
from .instances import preset_config, random_instance
from .io import fmt, load_game, load_solution, save_game, save_solution
from .solvers import SOLVERS, Inapplicable, applicable, run_solver

log = logging.getLogger("lqgne")

PRESETS = ("paper", "paper-eq")


class BadInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadInput(message)


def _vec(v) -> str:
    return "[" + ", ".join(fmt(a) for a in np.ravel(v)) + "]"


def _agents(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise BadInput(f"--agents expects comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise BadInput("--agents needs at least one positive count")
    return out


def _load(path):
    try:
        return load_game(path)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise BadInput(f"cannot read instance {path}: {exc}") from None


def _options(args) -> SolverOptions:
    try:
        return SolverOptions(eps=args.eps, max_iters=args.max_iters)
    except ValueError as exc:
        raise BadInput(str(exc)) from None


def _print_residuals(res, out) -> None:
    for k, v in res.as_dict().items():
        print(f"  {k} = {fmt(v)}", file=out)


def cmd_solve(args, out) -> int:
    game = _load(args.input)
    opts = _options(args)
    F = assemble_pseudogradient(game)
    names = list(SOLVERS) if args.solver == "all" else [args.solver]
    optimal = {}
    saved = False
    for name in names:
        if args.solver == "all" and not applicable(name, game):
            print(f"solver {name}: --", file=out)
            continue
        try:
            res = run_solver(name, game, opts)
        except Inapplicable as exc:
            if args.solver != "all":
                raise BadInput(f"{name} does not apply to this game: {exc}") from None
            print(f"solver {name}: --", file=out)
            continue
        print(f"solver {name}: status {res.status}, iterations {res.iterations}", file=out)
        if res.message and res.status != OPTIMAL:
            print(f"  message: {res.message}", file=out)
        if res.status != OPTIMAL:
            continue
        print(f"  x = {_vec(res.x)}", file=out)
        print(f"  lambda = {_vec(res.lam)}", file=out)
        if game.constraints.q:
            print(f"  nu = {_vec(res.nu)}", file=out)
        _print_residuals(kkt_residuals(game, F, res.x, res.lam, res.nu), out)
        optimal[name] = res.x
        if args.out and not saved:
            save_solution(args.out, res.x, res.lam, res.nu, solver=name, status=res.status,
                          iterations=res.iterations)
            saved = True
    if args.solver == "all" and len(optimal) > 1:
        keys = list(optimal)
        worst = max(float(np.abs(optimal[a] - optimal[b]).max())
                    for i, a in enumerate(keys) for b in keys[i + 1:])
        print(f"max disagreement ||x_a - x_b||_inf over {', '.join(keys)} = {fmt(worst)}", file=out)
    return 0


def cmd_certify(args, out) -> int:
    game = _load(args.input)
    try:
        x, lam, nu = load_solution(args.solution)
    except (OSError, ValueError, TypeError) as exc:
        raise BadInput(f"cannot read solution {args.solution}: {exc}") from None
    if lam.size == 0 and game.constraints.m:
        lam = np.zeros(game.constraints.m)
    if nu.size == 0 and game.constraints.q:
        nu = np.zeros(game.constraints.q)
    res = kkt_residuals(game, assemble_pseudogradient(game), x, lam, nu)
    _print_residuals(res, out)
    print(f"max residual = {fmt(res.max())}", file=out)
    print(f"certified (tol {fmt(args.tol)}): {'yes' if is_vgne(res, args.tol) else 'no'}", file=out)
    return 0


def _preset(name: str, N: int, seed: int):
    return preset_config(N, seed=seed, equalities=(name == "paper-eq"))


def cmd_gen(args, out) -> int:
    inst = random_instance(_preset(args.preset, args.agents, args.seed))
    g = inst.game
    save_game(g, args.out)
    print(f"wrote {args.out}: N={g.N} n={g.n} m={g.constraints.m} q={g.constraints.q}", file=out)
    return 0


def cmd_bench(args, out) -> int:
    sizes = _agents(args.agents)
    if args.trials < 0:
        raise BadInput("--trials must be nonnegative")
    configs = [_preset(args.preset, N, args.seed) for N in sizes]
    jobs = 1 if args.serial else min(4, os.cpu_count() or 1)
    report = bench.benchmark_sweep(configs, args.trials, SOLVERS, _options(args), jobs=jobs)
    bench.write_report(report, args.out, args.summary, timing=not args.no_timing)
    header, lines = report.summary_rows()
    if args.trials:
        for line in lines:
            cells = dict(zip(header, line))
            parts = [f"N={cells['N']}"]
            for s in SOLVERS:
                if f"{s}_success" in cells:
                    parts.append(f"{s} {cells[f'{s}_success']}")
            parts.append(f"disagreement {cells['max_disagreement']}")
            print("  ".join(parts), file=out)
    print(f"wrote {args.out} ({len(report.rows)} rows)", file=out)
    return 0


def cmd_mpc(args, out) -> int:
    if args.horizon < 1 or args.steps < 0:
        raise BadInput("--horizon must be >= 1 and --steps >= 0")
    plant, specs = gtmpc.benchmark_setup(args.seed, args.horizon)
    trace = gtmpc.closed_loop(plant, specs, np.zeros(plant.nx), args.steps, args.solver)
    Path(args.out).write_text(trace.to_csv(timing=not args.no_timing))
    ok = sum(s == OPTIMAL for s in trace.statuses)
    print(f"{ok}/{len(trace)} steps optimal; wrote {args.out}", file=out)
    if len(trace):
        print(f"final y = {_vec(trace.Y[-1])}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lqgne", description="Variational equilibria of linear-quadratic games.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("--input", required=True)
    s.add_argument("--solver", choices=SOLVERS + ("all",), default="goldnash")
    s.add_argument("--eps", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=None)
    s.add_argument("--out", default=None, help="solution file to write")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="KKT residuals of a solution file")
    c.add_argument("--input", required=True)
    c.add_argument("--solution", required=True)
    c.add_argument("--tol", type=float, default=1e-8)
    c.set_defaults(func=cmd_certify)

    g = sub.add_parser("gen", help="write a random instance")
    g.add_argument("--preset", choices=PRESETS, default="paper")
    g.add_argument("--agents", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="benchmark sweep to CSV")
    b.add_argument("--preset", choices=PRESETS, default="paper")
    b.add_argument("--agents", default="2,3,5")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--eps", type=float, default=1e-8)
    b.add_argument("--max-iters", type=int, default=None)
    b.add_argument("--out", required=True)
    b.add_argument("--summary", default=None, help="summary table CSV")
    b.add_argument("--no-timing", action="store_true", help="write wall_ms as nan (byte-stable output)")
    b.add_argument("--serial", action="store_true", help="no worker processes")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("mpc", help="closed-loop game-theoretic MPC simulation")
    m.add_argument("--horizon", type=int, default=10)
    m.add_argument("--steps", type=int, default=40)
    m.add_argument("--solver", choices=SOLVERS, default="goldnash")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.add_argument("--no-timing", action="store_true")
    m.set_defaults(func=cmd_mpc)
    return p


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except BadInput as exc:
        print(f"error: {exc}", file=err)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=err,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (BadInput, InvalidGame, DimensionMismatch, FileNotFoundError, IsADirectoryError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=err)
        return 2


def main() -> None:
    sys.exit(run())
