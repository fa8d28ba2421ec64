"""Benchmark sweeps over random instances with per-trial CSV output."""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .certify import kkt_residuals
from .game import assemble_pseudogradient
from .goldnash import OPTIMAL, SolverOptions
from .instances import GenConfig, GeneratedInstance, random_instance
from .io import fmt
from .solvers import Inapplicable, applicable, run_solver

log = logging.getLogger(__name__)

CSV_HEADER = ("N", "n", "m", "q", "solver", "trial", "seed", "status", "wall_ms", "iterations", "kkt_resid")


@dataclass(frozen=True)
class BenchRow:
    N: int
    n: int
    m: int
    q: int
    solver: str
    trial: int
    seed: int
    status: str
    wall_ms: float
    iterations: int
    kkt_resid: float


@dataclass
class BenchmarkReport:
    rows: list[BenchRow]
    solvers: tuple[str, ...]
    configs: tuple[GenConfig, ...]
    # max pairwise ||x_a - x_b||_inf among optimal solvers, per config index
    disagreement: dict[int, float]
    inapplicable: dict[int, set[str]]

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            vals = list(astuple(r))
            vals[8] = fmt(r.wall_ms) if timing else "nan"
            vals[10] = fmt(r.kkt_resid)
            w.writerow(vals)
        return buf.getvalue()

    def summary_rows(self) -> tuple[list[str], list[list[str]]]:
        """Table with one line per size and per-solver timing columns.

        Solvers inapplicable at every size get no columns; a solver that is
        inapplicable at some sizes shows ``--`` there.
        """
        shown = [s for s in self.solvers
                 if any(s not in self.inapplicable.get(i, set()) for i in range(len(self.configs)))]
        header = ["N", "n", "m", "q"]
        for s in shown:
            header += [f"{s}_{k}" for k in ("mean_ms", "median_ms", "min_ms", "max_ms", "success", "mean_iters")]
        header.append("max_disagreement")
        lines = []
        for i, cfg in enumerate(self.configs):
            mine = [r for r in self.rows if r.N == cfg.N and r.q == cfg.q and r.n == cfg.n and r.m == cfg.m]
            line = [str(cfg.N), str(cfg.n), str(cfg.m), str(cfg.q)]
            for s in shown:
                if s in self.inapplicable.get(i, set()):
                    line += ["--"] * 6
                    continue
                rs = [r for r in mine if r.solver == s]
                t = [r.wall_ms for r in rs]
                ok = sum(r.status == OPTIMAL for r in rs)
                if not rs:
                    line += [""] * 6
                    continue
                line += [fmt(statistics.fmean(t)), fmt(statistics.median(t)), fmt(min(t)), fmt(max(t)),
                         f"{ok}/{len(rs)}", fmt(statistics.fmean(r.iterations for r in rs))]
            line.append(fmt(self.disagreement.get(i, float("nan"))))
            lines.append(line)
        return header, lines

    def summary_csv(self) -> str:
        header, lines = self.summary_rows()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        if self.rows:
            w.writerows(lines)
        return buf.getvalue()


def _trial_config(cfg: GenConfig, trial: int) -> GenConfig:
    return GenConfig(**{f.name: getattr(cfg, f.name) for f in fields(GenConfig)} | {"seed": cfg.seed + trial})


def _solve_timed(name, inst: GeneratedInstance, options):
    t0 = time.perf_counter()
    res = run_solver(name, inst.game, options)
    return res, 1e3 * (time.perf_counter() - t0)


def benchmark_sweep(
    configs: Sequence[GenConfig],
    trials: int,
    solvers: Sequence[str] = ("goldnash", "lemke", "lemke_dual"),
    options: SolverOptions | None = None,
    jobs: int = 1,
) -> BenchmarkReport:
    """Solve ``trials`` random instances per configuration with each solver.

    Trial ``t`` of a configuration uses seed ``cfg.seed + t``.  One untimed
    warm-up solve per (configuration, solver) precedes the timed trials.
    Solver exceptions are recorded as ``status='error'``; inapplicable solvers
    produce no rows.  ``jobs > 1`` generates instances in worker processes;
    timed solves always run serially.
    """
    rows: list[BenchRow] = []
    disagreement: dict[int, float] = {}
    inapplicable: dict[int, set[str]] = {}
    for ci, cfg in enumerate(configs):
        tcfgs = [_trial_config(cfg, t) for t in range(trials)]
        if jobs > 1 and trials > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                insts = list(pool.map(random_instance, tcfgs))
        else:
            insts = [random_instance(c) for c in tcfgs]
        skip = {s for s in solvers if insts and not applicable(s, insts[0].game)}
        if not insts:
            skip = {s for s in solvers if s == "lemke" and (cfg.q > 0 or not cfg.box_bounds)}
        inapplicable[ci] = skip
        active = [s for s in solvers if s not in skip]
        if insts:
            for s in active:
                try:
                    run_solver(s, insts[0].game, options)
                except Exception:  # warm-up only
                    pass
        worst = 0.0
        for t, inst in enumerate(insts):
            game = inst.game
            F = assemble_pseudogradient(game)
            C = game.constraints
            xs = []
            for s in active:
                try:
                    res, ms = _solve_timed(s, inst, options)
                except Inapplicable:
                    continue
                except Exception as exc:
                    log.warning("%s failed on N=%d trial %d: %s", s, cfg.N, t, exc)
                    rows.append(BenchRow(cfg.N, cfg.n, C.m, C.q, s, t, inst.config.seed, "error",
                                         float("nan"), 0, float("nan")))
                    continue
                resid = float("nan")
                if res.status == OPTIMAL:
                    resid = kkt_residuals(game, F, res.x, res.lam, res.nu).max()
                    xs.append(res.x)
                else:
                    log.warning("%s returned %s on N=%d trial %d (%s)", s, res.status, cfg.N, t, res.message)
                rows.append(BenchRow(cfg.N, cfg.n, C.m, C.q, s, t, inst.config.seed, res.status,
                                     ms, res.iterations, resid))
            for a in range(len(xs)):
                for b in range(a + 1, len(xs)):
                    worst = max(worst, float(np.abs(xs[a] - xs[b]).max()))
        disagreement[ci] = worst
    return BenchmarkReport(rows, tuple(solvers), tuple(configs), disagreement, inapplicable)


def write_report(report: BenchmarkReport, path: str | Path, summary_path: str | Path | None = None,
                 timing: bool = True) -> None:
    Path(path).write_text(report.to_csv(timing))
    if summary_path is not None:
        Path(summary_path).write_text(report.summary_csv())
