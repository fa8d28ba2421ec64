"""Name-based dispatch over the available equilibrium solvers."""

from __future__ import annotations

from .errors import HasEqualities, NoBounds
from .game import LQGame
from .goldnash import SolveResult, SolverOptions
from .goldnash import solve as goldnash_solve
from .lemke import solve_via_lemke

SOLVERS = ("goldnash", "lemke", "lemke_dual")


class Inapplicable(Exception):
    """The solver cannot handle this problem class (not a failure)."""


def applicable(name: str, game: LQGame) -> bool:
    if name == "lemke":
        return game.constraints.q == 0 and game.lower_bounds is not None
    return name in SOLVERS


def run_solver(name: str, game: LQGame, options: SolverOptions | None = None) -> SolveResult:
    if name == "goldnash":
        return goldnash_solve(game, options)
    if name == "lemke_dual":
        return solve_via_lemke(game, "dual")
    if name == "lemke":
        try:
            return solve_via_lemke(game, "primal")
        except (HasEqualities, NoBounds) as exc:
            raise Inapplicable(str(exc)) from exc
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
