"""Variational generalized Nash equilibria of strongly monotone LQ games."""

from .certify import KKTResiduals, enumerate_oracle, is_vgne, kkt_residuals
from .errors import (
    DimensionMismatch,
    HasEqualities,
    InconsistentEqualities,
    InvalidGame,
    NoBounds,
    SingularDCGain,
    SingularKKT,
    SingularMatrix,
    SingularSchur,
    SolverFailed,
)
from .game import (
    LQGame,
    PlayerCost,
    Pseudogradient,
    SharedConstraints,
    ValidationReport,
    assemble_pseudogradient,
    check_strong_monotonicity,
    preprocess_equalities,
    validate_game,
)
from .goldnash import INFEASIBLE, OPTIMAL, UNSOLVED, SolveResult, SolverOptions, solve
from .instances import GenConfig, preset_config, random_game, random_instance
from .lemke import build_dual_lcp, build_primal_lcp, lemke_solve, solve_via_lemke
from .solvers import SOLVERS, applicable, run_solver

__all__ = [
    "DimensionMismatch", "HasEqualities", "InconsistentEqualities", "InvalidGame", "NoBounds",
    "SingularDCGain", "SingularKKT", "SingularMatrix", "SingularSchur", "SolverFailed",
    "LQGame", "PlayerCost", "Pseudogradient", "SharedConstraints", "ValidationReport",
    "assemble_pseudogradient", "check_strong_monotonicity", "preprocess_equalities", "validate_game",
    "INFEASIBLE", "OPTIMAL", "UNSOLVED", "SolveResult", "SolverOptions", "solve",
    "KKTResiduals", "enumerate_oracle", "is_vgne", "kkt_residuals",
    "GenConfig", "preset_config", "random_game", "random_instance",
    "build_dual_lcp", "build_primal_lcp", "lemke_solve", "solve_via_lemke",
    "SOLVERS", "applicable", "run_solver",
]
