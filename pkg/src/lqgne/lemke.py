"""Lemke complementary pivoting and the LCP forms of the equilibrium KKT system.

Two reformulations are provided:

* primal: with lower bounds ``x >= l`` and no equalities, the unknowns are
  ``(y, lambda)`` with ``y = x - l`` and
  ``M = [[G, A^T], [-A, 0]]``, ``q = [G l + g; b - A l]``;
* dual: ``x`` and ``nu`` are eliminated through the KKT block
  ``H = [[G, E^T], [E, 0]]``, leaving an LCP in ``lambda`` alone with
  ``M = A H11 A^T`` and ``q = b + A (H11 g - H12 f)``, from
  ``[x; nu] = H^-1 [-g - A^T lambda; f]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import HasEqualities, InvalidGame, NoBounds, SingularKKT, SingularMatrix
from .game import (
    LQGame,
    Pseudogradient,
    SharedConstraints,
    assemble_pseudogradient,
    check_strong_monotonicity,
    independent_equality_rows,
)
from .goldnash import INFEASIBLE, OPTIMAL, UNSOLVED, SolveResult, expand_nu
from .linalg import lu_factor, lu_solve

SOLVED = "solved"
RAY = "ray_termination"
MAX_PIVOTS = "max_pivots"

LCP_TOL = 1e-9
PIVOT_TOL = 1e-10

_STATUS_MAP = {SOLVED: OPTIMAL, RAY: INFEASIBLE, MAX_PIVOTS: UNSOLVED}


@dataclass(frozen=True)
class LCPInstance:
    """Find ``z >= 0`` with ``w = M z + qv >= 0`` and ``z^T w = 0``."""

    M: np.ndarray
    qv: np.ndarray
    provenance: str = "raw"
    recovery: Any = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        qv = np.asarray(self.qv, dtype=float).ravel()
        if qv.size == 0:
            M = M.reshape(0, 0)
        if M.shape != (qv.size, qv.size):
            raise ValueError(f"M is {M.shape}, qv has length {qv.size}")
        if self.provenance not in ("primal", "dual", "raw"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "qv", qv)

    @property
    def k(self) -> int:
        return self.qv.size


@dataclass(frozen=True)
class LemkeResult:
    status: str
    z: np.ndarray
    w: np.ndarray
    pivots: int

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


@dataclass(frozen=True)
class _PrimalRecovery:
    lb: np.ndarray
    n: int
    fold_row: np.ndarray  # A row encoding x_j >= lb_j, or -1
    fold_scale: np.ndarray


@dataclass(frozen=True)
class _DualRecovery:
    base: np.ndarray  # [x; nu] at lambda = 0
    X: np.ndarray  # H^-1 [A^T; 0]
    n: int


def _bound_rows(A: np.ndarray, b: np.ndarray, lb: np.ndarray):
    """For each variable j, a row of ``A`` that reads ``-alpha x_j <= -alpha lb_j``."""
    n = A.shape[1]
    rows = -np.ones(n, dtype=int)
    scale = np.ones(n)
    if A.shape[0] == 0:
        return rows, scale
    nnz = np.count_nonzero(A, axis=1)
    for i in np.flatnonzero(nnz == 1):
        j = int(np.flatnonzero(A[i])[0])
        alpha = -A[i, j]
        if alpha > 0 and rows[j] < 0 and np.isclose(b[i] / alpha, -lb[j], rtol=1e-12, atol=1e-14):
            rows[j] = i
            scale[j] = alpha
    return rows, scale


def build_primal_lcp(game: LQGame, F: Pseudogradient, lower_bounds=None) -> LCPInstance:
    """Primal LCP over ``(x - l, lambda)``.

    Multipliers of ``x >= l`` are folded into the matching bound rows of ``A``
    on recovery when such rows exist.
    """
    C = game.constraints
    if C.q > 0:
        raise HasEqualities("primal LCP reformulation needs a game without equality constraints")
    lb = lower_bounds if lower_bounds is not None else game.lower_bounds
    if lb is None:
        raise NoBounds("primal LCP reformulation needs finite lower bounds on x")
    lb = np.asarray(lb, dtype=float).ravel()
    if lb.shape[0] != game.n or not np.all(np.isfinite(lb)):
        raise NoBounds(f"need {game.n} finite lower bounds")
    G, g = np.asarray(F.G), np.asarray(F.g)
    A, b = C.A, C.b
    m = C.m
    M = np.block([[G, A.T], [-A, np.zeros((m, m))]])
    qv = np.concatenate([G @ lb + g, b - A @ lb])
    rows, scale = _bound_rows(A, b, lb)
    return LCPInstance(M, qv, "primal", _PrimalRecovery(lb, game.n, rows, scale))


def build_dual_lcp(game: LQGame, F: Pseudogradient) -> LCPInstance:
    """Dual LCP in the inequality multipliers alone.

    Raises
    ------
    SingularKKT
        If ``[[G, E^T], [E, 0]]`` is numerically singular.
    """
    C = game.constraints
    n, q = game.n, C.q
    G, g = np.asarray(F.G), np.asarray(F.g)
    H = np.block([[G, C.E.T], [C.E, np.zeros((q, q))]])
    try:
        H_lu = lu_factor(H)
    except SingularMatrix as exc:
        raise SingularKKT(f"KKT block matrix is singular: {exc}") from exc
    rhs = np.hstack([np.vstack([C.A.T, np.zeros((q, C.m))]), np.concatenate([-g, C.f])[:, None]])
    sol = lu_solve(H_lu, rhs)
    X, base = sol[:, :-1], sol[:, -1]
    M = C.A @ X[:n]
    qv = C.b - C.A @ base[:n]
    return LCPInstance(M, qv, "dual", _DualRecovery(base, X, n))


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _leaving_row(T: np.ndarray, enter: int, basis: np.ndarray, k: int, z0: int) -> int | None:
    """Min-ratio row for the entering column with lexicographic tie breaking
    on the rows of the basis inverse; ``z0`` leaves whenever it ties."""
    col = T[:, enter]
    cmax = float(np.abs(col).max(initial=0.0))
    cand = np.flatnonzero(col > PIVOT_TOL * max(1.0, cmax))
    if cand.size == 0:
        return None
    ratios = T[cand, -1] / col[cand]
    rmin = ratios.min()
    ties = cand[ratios <= rmin + 1e-12 * max(1.0, abs(rmin))]
    if ties.size == 1:
        return int(ties[0])
    hit = ties[basis[ties] == z0]
    if hit.size:
        return int(hit[0])
    for j in range(k):
        vals = T[ties, j] / col[ties]
        vmin = vals.min()
        ties = ties[vals <= vmin + 1e-12 * max(1.0, abs(vmin))]
        if ties.size == 1:
            break
    return int(ties[0])


def _refine(M: np.ndarray, qv: np.ndarray, basis: np.ndarray, T: np.ndarray):
    """Recompute basic values from the original columns; fall back to the
    tableau values if the basis matrix is unusable."""
    k = qv.size
    z = np.zeros(k)
    B = np.zeros((k, k))
    for i, v in enumerate(basis):
        if v < k:
            B[v, i] = 1.0
        elif v < 2 * k:
            B[:, i] = -M[:, v - k]
        else:
            B[:, i] = -1.0
    try:
        xB = np.linalg.solve(B, qv)
        if not np.all(np.isfinite(xB)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        xB = T[:, -1].copy()
    zmask = (basis >= k) & (basis < 2 * k)
    z[basis[zmask] - k] = xB[zmask]
    return z


def _certified(M, qv, z, tol) -> bool:
    w = M @ z + qv
    scale = max(1.0, float(np.abs(M).max(initial=0.0)) * float(np.abs(z).max(initial=0.0)))
    return bool(z.min(initial=0.0) >= -tol * scale and w.min(initial=0.0) >= -tol * scale
                and np.all(np.minimum(z, w) <= tol * scale))


def lemke_solve(lcp: LCPInstance, max_pivots: int | None = None) -> LemkeResult:
    """Lemke's complementary pivoting with covering vector ``e = (1, ..., 1)``.

    The pivot count includes the initial entry of the artificial variable.
    """
    M, qv = lcp.M, lcp.qv
    k = lcp.k
    if k == 0 or qv.min() >= 0.0:
        return LemkeResult(SOLVED, np.zeros(k), qv.copy(), 0)
    if max_pivots is None:
        max_pivots = 50 * k
    z0 = 2 * k
    T = np.hstack([np.eye(k), -M, -np.ones((k, 1)), qv[:, None]])
    basis = np.arange(k)

    r = int(np.argmin(qv))
    _pivot(T, r, z0)
    leaving = int(basis[r])
    basis[r] = z0
    enter = leaving + k
    pivots = 1
    while True:
        if pivots >= max_pivots:
            return LemkeResult(MAX_PIVOTS, np.full(k, np.nan), np.full(k, np.nan), pivots)
        r = _leaving_row(T, enter, basis, k, z0)
        if r is None:
            return LemkeResult(RAY, np.full(k, np.nan), np.full(k, np.nan), pivots)
        _pivot(T, r, enter)
        pivots += 1
        leaving = int(basis[r])
        basis[r] = enter
        if leaving == z0:
            break
        enter = leaving + k if leaving < k else leaving - k

    z = _refine(M, qv, basis, T)
    if not _certified(M, qv, z, LCP_TOL):
        ztab = np.zeros(k)
        zmask = (basis >= k) & (basis < 2 * k)
        ztab[basis[zmask] - k] = T[zmask, -1]
        if _certified(M, qv, ztab, LCP_TOL):
            z = ztab
    return LemkeResult(SOLVED, z, M @ z + qv, pivots)


def recover(lcp: LCPInstance, z: np.ndarray, w: np.ndarray | None = None):
    """Map an LCP solution back to ``(x, lambda, nu)``."""
    rec = lcp.recovery
    if lcp.provenance == "dual":
        sol = rec.base - rec.X @ z
        return sol[:rec.n], z.copy(), sol[rec.n:]
    if lcp.provenance == "primal":
        n = rec.n
        x = z[:n] + rec.lb
        lam = z[n:].copy()
        mu = (lcp.M @ z + lcp.qv)[:n] if w is None else w[:n]
        for j in np.flatnonzero(rec.fold_row >= 0):
            lam[rec.fold_row[j]] += mu[j] / rec.fold_scale[j]
        return x, lam, np.zeros(0)
    raise ValueError("raw LCP instances carry no recovery data")


def solve_via_lemke(game: LQGame, variant: str = "dual", max_pivots: int | None = None,
                    lower_bounds=None) -> SolveResult:
    """Solve the game through one of the LCP reformulations.

    Raises
    ------
    HasEqualities, NoBounds
        When the primal variant is not applicable.
    InvalidGame
        If the game is not strongly monotone or equalities are inconsistent.
    """
    if variant not in ("primal", "dual"):
        raise ValueError(f"variant must be 'primal' or 'dual', got {variant!r}")
    q_orig = game.constraints.q
    keep = independent_equality_rows(game.constraints)
    if keep.size < q_orig:
        C = game.constraints
        game = game.with_constraints(SharedConstraints(C.A, C.b, C.E[keep], C.f[keep]))
    F = assemble_pseudogradient(game)
    report = check_strong_monotonicity(F)
    if not report.monotone:
        raise InvalidGame("game is not strongly monotone: " + "; ".join(report.messages))
    if variant == "primal":
        lcp = build_primal_lcp(game, F, lower_bounds)
    else:
        lcp = build_dual_lcp(game, F)
    res = lemke_solve(lcp, max_pivots)
    name = "lemke" if variant == "primal" else "lemke_dual"
    status = _STATUS_MAP[res.status]
    m = game.constraints.m
    if res.solved:
        x, lam, nu = recover(lcp, res.z, res.w)
        nu = expand_nu(nu, keep, q_orig)
    else:
        x, lam, nu = np.full(game.n, np.nan), np.full(m, np.nan), np.full(q_orig, np.nan)
    active = tuple(int(i) for i in np.flatnonzero(lam > 0)) if res.solved else ()
    return SolveResult(status, x, lam, nu, res.pivots, active, None, name, res.status)
