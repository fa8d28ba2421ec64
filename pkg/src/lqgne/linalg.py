"""Dense kernels used by the solvers: pivoted LU and QR, and the equality-KKT
block elimination.

LU and QR are backed by LAPACK (``getrf``/``geqp3`` through scipy); this module
adds the singularity and rank conventions the solvers rely on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, SingularMatrix, SingularSchur

SINGULAR_TOL = 1e-12
RANK_TOL = 1e-10


def _inf_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.abs(M).sum(axis=1).max())


@dataclass(frozen=True)
class LUFactors:
    """Row-pivoted factorization ``G[perm] = L @ U``.

    ``lu`` and ``piv`` are the packed LAPACK factors; ``L``/``U`` are
    materialized on demand.
    """

    lu: np.ndarray
    piv: np.ndarray
    perm: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    @cached_property
    def L(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.n)

    @cached_property
    def U(self) -> np.ndarray:
        return np.triu(self.lu)


@dataclass(frozen=True)
class QRPivotFactors:
    Q_orth: np.ndarray
    R: np.ndarray
    col_perm: np.ndarray
    rank: int


@dataclass(frozen=True)
class KKTBlockSolve:
    x: np.ndarray
    nu: np.ndarray


def lu_factor(G: np.ndarray, singular_tol: float = SINGULAR_TOL) -> LUFactors:
    """Factor a square matrix with partial (row) pivoting.

    Raises
    ------
    SingularMatrix
        If some pivot satisfies ``|U_kk| <= singular_tol * ||G||_inf``.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"lu_factor needs a square matrix, got {G.shape}")
    n = G.shape[0]
    if n == 0:
        empty = np.zeros((0, 0))
        return LUFactors(empty, np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.intp))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(G, check_finite=False)
    diag = np.abs(np.diag(lu))
    thresh = singular_tol * _inf_norm(G)
    if not np.all(diag > thresh):
        k = int(np.argmin(diag))
        raise SingularMatrix(f"pivot {k} is {diag[k]:.3e} (threshold {thresh:.3e})")
    perm = np.arange(n)
    for i, p in enumerate(piv):
        if p != i:
            perm[[i, p]] = perm[[p, i]]
    return LUFactors(lu, piv, perm)


def lu_solve(F: LUFactors, B: np.ndarray) -> np.ndarray:
    """Solve ``G X = B`` by forward and backward substitution."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.n:
        raise DimensionMismatch(f"rhs has {B.shape[0]} rows, factor is {F.n}x{F.n}")
    if F.n == 0 or B.size == 0:
        return np.zeros(B.shape)
    return sla.lu_solve((F.lu, F.piv), B, check_finite=False)


def qr_pivot(Aug: np.ndarray, rank_tol: float | None = None) -> QRPivotFactors:
    """Column-pivoted QR ``Aug[:, col_perm] = Q_orth @ R``.

    The numerical rank counts diagonal entries of ``R`` above
    ``RANK_TOL * max(rows, cols) * ||Aug||_inf`` unless ``rank_tol`` is given.
    """
    Aug = np.atleast_2d(np.asarray(Aug, dtype=float))
    rows, cols = Aug.shape
    if Aug.size == 0:
        return QRPivotFactors(np.eye(rows), np.zeros((rows, cols)), np.arange(cols), 0)
    Q, R, P = sla.qr(Aug, pivoting=True, check_finite=False)
    if rank_tol is None:
        rank_tol = RANK_TOL * max(rows, cols) * _inf_norm(Aug)
    d = np.abs(np.diag(R))
    rank = int(np.count_nonzero(d > rank_tol))
    return QRPivotFactors(Q, R, P, rank)


def solve_equality_kkt(
    G_lu: LUFactors,
    E: np.ndarray,
    g: np.ndarray,
    f: np.ndarray,
    Y_E: np.ndarray | None = None,
) -> KKTBlockSolve:
    """Solve ``[G E^T; E 0][x; nu] = [-g; f]`` by eliminating ``x``.

    ``Y_E = G^-1 E^T`` may be passed in when it is already available.
    """
    x = -lu_solve(G_lu, g)
    q = E.shape[0]
    if q == 0:
        return KKTBlockSolve(x, np.zeros(0))
    if Y_E is None:
        Y_E = lu_solve(G_lu, E.T)
    try:
        S = lu_factor(E @ Y_E)
    except SingularMatrix as exc:
        raise SingularSchur(f"E G^-1 E^T is singular: {exc}") from exc
    nu = lu_solve(S, E @ x - f)
    x = x - Y_E @ nu
    return KKTBlockSolve(x, nu)
