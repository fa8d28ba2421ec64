"""KKT certification of candidate equilibria and a brute-force oracle.

The oracle enumerates active sets and solves each equality-constrained KKT
system with ``numpy.linalg`` directly, so it shares no code path with the
solvers it is used to check.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from .errors import DimensionMismatch
from .game import LQGame, Pseudogradient

ORACLE_TOL = 1e-7


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    eq_feas: float
    ineq_feas: float
    dual_feas: float
    complementarity: float

    def max(self) -> float:
        return max(asdict(self).values())

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def kkt_residuals(game: LQGame, F: Pseudogradient, x, lam, nu) -> KKTResiduals:
    """Residuals of the joint KKT system.

    ``stationarity = ||G x + g + A^T lam + E^T nu||_inf``,
    ``eq_feas = ||E x - f||_inf``, ``ineq_feas = max(0, max(A x - b))``,
    ``dual_feas = max(0, max(-lam))`` and ``complementarity = |lam^T (A x - b)|``.
    """
    C = game.constraints
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    nu = np.asarray(nu, dtype=float).ravel()
    if x.shape[0] != game.n or lam.shape[0] != C.m or nu.shape[0] != C.q:
        raise DimensionMismatch(
            f"expected x[{game.n}], lambda[{C.m}], nu[{C.q}]; "
            f"got x[{x.shape[0]}], lambda[{lam.shape[0]}], nu[{nu.shape[0]}]"
        )
    slack = C.A @ x - C.b
    stat = F.G @ x + F.g + C.A.T @ lam + C.E.T @ nu
    return KKTResiduals(
        stationarity=float(np.abs(stat).max(initial=0.0)),
        eq_feas=float(np.abs(C.E @ x - C.f).max(initial=0.0)),
        ineq_feas=float(max(0.0, slack.max(initial=0.0))),
        dual_feas=float(max(0.0, (-lam).max(initial=0.0))),
        complementarity=float(abs(lam @ slack)),
    )


def is_vgne(residuals: KKTResiduals, tol: float) -> bool:
    return residuals.max() <= tol


def enumerate_oracle(game: LQGame, F: Pseudogradient, tol: float = ORACLE_TOL, max_m: int = 20):
    """Find the equilibrium by trying every active set.

    Subsets are visited by increasing size, lexicographically within a size;
    the first one whose KKT solution certifies at ``tol`` is returned as
    ``(x, lam, nu)``.  Returns ``None`` if no subset certifies.
    """
    C = game.constraints
    m, q, n = C.m, C.q, game.n
    if m > max_m:
        raise ValueError(f"enumeration over 2^{m} active sets exceeds the budget (m <= {max_m})")
    G, g = np.asarray(F.G), np.asarray(F.g)
    for size in range(m + 1):
        for S in combinations(range(m), size):
            S = list(S)
            Abar = np.vstack([C.A[S], C.E])
            k = Abar.shape[0]
            if k and np.linalg.matrix_rank(Abar) < k:
                continue
            K = np.block([[G, Abar.T], [Abar, np.zeros((k, k))]])
            rhs = np.concatenate([-g, C.b[S], C.f])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = np.zeros(m)
            lam[S] = sol[n:n + size]
            nu = sol[n + size:]
            if is_vgne(kkt_residuals(game, F, x, lam, nu), tol):
                return x, lam, nu
    return None
