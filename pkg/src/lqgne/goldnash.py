"""Dual active-set (Goldfarb-Idnani style) solver for variational equilibria.

The iterate ``(x, lambda_W, nu, mu_p)`` always satisfies

    G x + g + E^T nu + sum_{k in W} lambda_k a_k + mu_p a_p = 0,
    A_W x = b_W,   E x = f,   lambda_W >= 0,   mu_p >= 0,

and the method repeatedly targets the most violated inequality ``p``, moving
along the primal direction ``z`` (which keeps the working constraints tight)
and the dual direction ``(r_W, s)`` until either ``p`` becomes tight (add) or a
working multiplier reaches zero (drop).  ``G`` need not be symmetric; only its
symmetric part must be positive definite.  Unlike the symmetric QP case,
termination is not guaranteed, so cycling surfaces as ``status='unsolved'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidGame, SingularMatrix, SingularSchur
from .game import (
    LQGame,
    Pseudogradient,
    SharedConstraints,
    assemble_pseudogradient,
    check_strong_monotonicity,
    independent_equality_rows,
)
from .linalg import LUFactors, lu_factor, lu_solve, solve_equality_kkt

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNSOLVED = "unsolved"

INF = math.inf


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and limits.

    ``max_iters=None`` means ``100 * (m + q + 1)``.  The iteration counter
    grows once per targeted constraint and once per inner step, and the budget
    bounds their sum.
    """

    eps: float = 1e-8
    max_iters: int | None = None
    check_invariants: bool = False
    inv_tol: float = 1e-8
    ratio_eps: float = 1e-12
    polish: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def budget(self, m: int, q: int) -> int:
        return self.max_iters if self.max_iters is not None else 100 * (m + q + 1)


@dataclass
class IterateState:
    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    W: list[int] = field(default_factory=list)
    mu_p: float = 0.0
    p: int | None = None
    iter_count: int = 0


@dataclass(frozen=True)
class InvariantRecord:
    iteration: int
    p: int | None
    working_set_size: int
    stationarity: float
    working_tightness: float
    equality_tightness: float
    min_multiplier: float
    z_norm: float
    apz: float
    tol: float
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class SolveResult:
    status: str
    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    iterations: int
    working_set: tuple[int, ...] = ()
    invariant_log: tuple[InvariantRecord, ...] | None = None
    solver: str = "goldnash"
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def initialize(game: LQGame, F: Pseudogradient, G_lu: LUFactors):
    """Equality-constrained starting point with an empty working set.

    Returns ``(state, Y_A, Y_E)`` where ``Y_A = G^-1 A^T`` and ``Y_E = G^-1 E^T``.
    """
    C = game.constraints
    Y_A = lu_solve(G_lu, C.A.T)
    Y_E = lu_solve(G_lu, C.E.T)
    sol = solve_equality_kkt(G_lu, C.E, F.g, C.f, Y_E)
    state = IterateState(sol.x, np.zeros(C.m), sol.nu)
    return state, Y_A, Y_E


def select_violated(x: np.ndarray, A: np.ndarray, b: np.ndarray, eps: float,
                    exclude=()) -> tuple[int | None, float]:
    """Most violated inequality row (lowest index on ties), or ``None`` if
    every violation is at most ``eps``.

    Rows in ``exclude`` (the working set, tight by construction) are skipped.
    """
    if A.shape[0] == 0:
        return None, 0.0
    viol = A @ x - b
    if len(exclude):
        viol[list(exclude)] = -INF
    p = int(np.argmax(viol))
    rho = float(viol[p])
    if rho <= eps:
        return None, rho
    return p, rho


def directions(W, p: int, Y_A: np.ndarray, Y_E: np.ndarray, A: np.ndarray, E: np.ndarray):
    """Primal step ``z`` and dual steps ``(r_W, s)`` for target ``p``.

    Solves ``S_W rbar = Abar_W y_p`` with ``S_W = Abar_W Y_Wbar`` and sets
    ``z = Y_Wbar rbar - y_p``, so that ``Abar_W z = 0``.
    """
    W = list(W)
    y_p = Y_A[:, p]
    nW = len(W)
    if nW + E.shape[0] == 0:
        return -y_p, np.zeros(0), np.zeros(0)
    Abar = np.vstack([A[W], E])
    Ybar = np.hstack([Y_A[:, W], Y_E])
    try:
        S_lu = lu_factor(Abar @ Ybar)
    except SingularMatrix as exc:
        raise SingularSchur(f"working-set Schur matrix singular (|W|={nW}): {exc}") from exc
    rbar = lu_solve(S_lu, Abar @ y_p)
    z = Ybar @ rbar - y_p
    return z, rbar[:nW], rbar[nW:]


def step_lengths(state: IterateState, p: int, z: np.ndarray, r_W: np.ndarray,
                 A: np.ndarray, b: np.ndarray, eps: float, ratio_eps: float = 1e-12):
    """Primal step ``t2`` that makes row ``p`` tight and dual step ``t1`` that
    zeroes the first blocking working multiplier.

    Returns ``(t1, t2, j_star)``; ``j_star`` is the row to drop (``None`` when
    ``t1`` is infinite).
    """
    a_p = A[p]
    apz = float(a_p @ z)
    t2 = -(float(a_p @ state.x) - b[p]) / apz if apz < -eps else INF
    t1, j_star = INF, None
    for k, r in zip(state.W, r_W):
        if r > ratio_eps:
            ratio = max(state.lam[k], 0.0) / r
            if ratio < t1 or (ratio == t1 and k < j_star):
                t1, j_star = ratio, k
    return t1, t2, j_star


def take_step(state: IterateState, t: float, z: np.ndarray, r_W: np.ndarray,
              s: np.ndarray, p: int) -> IterateState:
    lam = state.lam.copy()
    if state.W:
        lam[state.W] -= t * r_W
    mu_p = state.mu_p + t
    lam[p] = mu_p
    return replace(state, x=state.x + t * z, lam=lam, nu=state.nu - t * s, W=list(state.W),
                   mu_p=mu_p, p=p)


def _prepare(game: LQGame):
    """Reduce equalities to full row rank and factor ``G``.

    Returns ``(reduced_game, F, G_lu, keep)`` where ``keep`` lists the
    original equality rows that survived.
    """
    keep = independent_equality_rows(game.constraints)
    if keep.size < game.constraints.q:
        C = game.constraints
        game = game.with_constraints(SharedConstraints(C.A, C.b, C.E[keep], C.f[keep]))
    F = assemble_pseudogradient(game)
    report = check_strong_monotonicity(F)
    if not report.monotone:
        raise InvalidGame("game is not strongly monotone: " + "; ".join(report.messages))
    try:
        G_lu = lu_factor(F.G)
    except SingularMatrix as exc:
        raise InvalidGame(f"pseudogradient matrix is singular: {exc}") from exc
    return game, F, G_lu, keep


def expand_nu(nu: np.ndarray, keep: np.ndarray, q: int) -> np.ndarray:
    """Scatter multipliers of the kept equality rows back to all ``q`` rows."""
    out = np.zeros(q)
    out[keep] = nu
    return out


def _check(state: IterateState, F, A, b, E, f, j, tol_base, z=None, apz=None) -> InvariantRecord:
    x = state.x
    scale = max(1.0, _ninf(F.G) * float(np.abs(x).max(initial=0.0)) + float(np.abs(F.g).max(initial=0.0)))
    tol = tol_base * scale
    stat = F.G @ x + F.g + A.T @ state.lam + E.T @ state.nu
    W = state.W
    stationarity = float(np.abs(stat).max(initial=0.0))
    wt = float(np.abs(A[W] @ x - b[W]).max(initial=0.0))
    et = float(np.abs(E @ x - f).max(initial=0.0))
    mins = [state.mu_p] + ([float(state.lam[W].min())] if W else [])
    minmult = min(mins)
    viol = []
    if stationarity > tol:
        viol.append(f"stationarity {stationarity:.3e}")
    if wt > tol:
        viol.append(f"working rows not tight {wt:.3e}")
    if et > tol:
        viol.append(f"equalities not tight {et:.3e}")
    if minmult < -tol:
        viol.append(f"negative multiplier {minmult:.3e}")
    zn = float(np.abs(z).max(initial=0.0)) if z is not None else 0.0
    if z is not None and zn > 1e-10 and not apz < 0.0:
        viol.append(f"a_p^T z = {apz:.3e} >= 0 with |z| = {zn:.3e}")
    return InvariantRecord(j, state.p, len(W), stationarity, wt, et, minmult, zn,
                           float("nan") if apz is None else apz, tol, tuple(viol))


def _kkt_error(state: IterateState, F, A, b, E, f) -> float:
    x, W = state.x, state.W
    parts = [
        np.abs(F.G @ x + F.g + A.T @ state.lam + E.T @ state.nu).max(initial=0.0),
        np.abs(A[W] @ x - b[W]).max(initial=0.0),
        np.abs(E @ x - f).max(initial=0.0),
        (A @ x - b).max(initial=0.0),
        (-state.lam).max(initial=0.0),
    ]
    return float(max(parts))


def polish(state: IterateState, F, A, b, E, f) -> IterateState:
    """Re-solve the KKT system of the final working set in one shot.

    Updates along ``z`` keep ``A_W x = b_W`` only up to accumulated round-off;
    the polished point is kept when its KKT error is not larger.
    """
    W = list(state.W)
    n, k, q = F.G.shape[0], len(W), E.shape[0]
    AW = A[W]
    K = np.zeros((n + k + q, n + k + q))
    K[:n, :n] = F.G
    K[:n, n:n + k] = AW.T
    K[:n, n + k:] = E.T
    K[n:n + k, :n] = AW
    K[n + k:, :n] = E
    try:
        sol = lu_solve(lu_factor(K), np.concatenate([-F.g, b[W], f]))
    except SingularMatrix:
        return state
    lam = np.zeros_like(state.lam)
    lam[W] = sol[n:n + k]
    cand = replace(state, x=sol[:n], lam=lam, nu=sol[n + k:], W=W, mu_p=0.0)
    if _kkt_error(cand, F, A, b, E, f) <= _kkt_error(state, F, A, b, E, f):
        return cand
    return state


def _ninf(M):
    return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


def solve(game: LQGame, options: SolverOptions | None = None) -> SolveResult:
    """Compute the variational equilibrium of ``game``.

    Raises
    ------
    InvalidGame
        If the game is not strongly monotone or its equalities are inconsistent.
    SingularSchur
        If a working-set Schur matrix turns out numerically singular.
    """
    opts = options or SolverOptions()
    q_orig = game.constraints.q
    game, F, G_lu, keep = _prepare(game)
    C = game.constraints
    A, b, E, f = C.A, C.b, C.E, C.f
    m = C.m
    M = opts.budget(m, C.q)
    eps = opts.eps
    log: list[InvariantRecord] | None = [] if opts.check_invariants else None

    state, Y_A, Y_E = initialize(game, F, G_lu)
    if log is not None:
        log.append(_check(state, F, A, b, E, f, 0, opts.inv_tol))

    def result(status, msg=""):
        return SolveResult(status, state.x, state.lam, expand_nu(state.nu, keep, q_orig), state.iter_count,
                           tuple(state.W), None if log is None else tuple(log), message=msg)

    while True:
        p, _ = select_violated(state.x, A, b, eps, state.W)
        if p is None:
            if opts.polish and state.W:
                state = polish(state, F, A, b, E, f)
            return result(OPTIMAL)
        state.mu_p = 0.0
        state.p = p
        state.iter_count += 1
        zero_steps = 0
        while True:
            z, r_W, s = directions(state.W, p, Y_A, Y_E, A, E)
            state.iter_count += 1
            t1, t2, j_star = step_lengths(state, p, z, r_W, A, b, eps, opts.ratio_eps)
            if t1 == INF and t2 == INF:
                return result(INFEASIBLE, f"no step for row {p}")
            t = min(t1, t2)
            state = take_step(state, t, z, r_W, s, p)
            added = t2 <= t1
            if added:
                state.W.append(p)
            else:
                state.lam[j_star] = 0.0
                state.W.remove(j_star)
            if log is not None:
                log.append(_check(state, F, A, b, E, f, state.iter_count, opts.inv_tol,
                                  z, float(A[p] @ z)))
            if added:
                break
            zero_steps = zero_steps + 1 if t == 0.0 else 0
            if zero_steps > m:
                return result(UNSOLVED, f"{zero_steps} consecutive zero-length drops on row {p}")
            if state.iter_count >= M:
                return result(UNSOLVED, "iteration limit")
        if state.iter_count >= M:
            return result(UNSOLVED, "iteration limit")
