"""Linear-quadratic game data model.

Player ``i`` minimizes ``0.5 x^T Q_i x + c_i^T x`` over its own block ``x_i``
of the joint vector ``x``, subject to the shared constraints ``A x <= b`` and
``E x = f``.  The variational equilibrium is characterized by the affine
pseudogradient ``F(x) = G x + g`` obtained by stacking each player's own-block
gradient rows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InconsistentEqualities, InvalidGame
from .linalg import RANK_TOL, qr_pivot

SYM_TOL = 1e-10
EIG_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _norm_inf(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        return float(np.abs(M).max())
    return float(np.abs(M).sum(axis=1).max())


@dataclass(frozen=True)
class PlayerCost:
    """Quadratic cost of one player over the joint variable.

    An asymmetric ``Q`` (beyond ``1e-10 * ||Q||_inf``) is replaced by its
    symmetric part with a warning, since only the symmetric part enters the
    cost.
    """

    Q: np.ndarray
    c: np.ndarray
    block_start: int
    block_size: int

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        c = np.array(self.c, dtype=float).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got shape {Q.shape}")
        if c.shape[0] != Q.shape[0]:
            raise DimensionMismatch(f"c has length {c.shape[0]}, Q is {Q.shape[0]}x{Q.shape[0]}")
        if self.block_size < 1 or self.block_start < 0 or self.block_start + self.block_size > Q.shape[0]:
            raise DimensionMismatch(
                f"block [{self.block_start}, {self.block_start + self.block_size}) "
                f"outside 0..{Q.shape[0]}"
            )
        asym = _norm_inf(Q - Q.T)
        if asym > SYM_TOL * _norm_inf(Q):
            warnings.warn(f"player cost Q is not symmetric (|Q-Q^T|={asym:.3e}); symmetrizing")
            Q = 0.5 * (Q + Q.T)
        blk = Q[self.block, self.block]
        if np.linalg.eigvalsh(0.5 * (blk + blk.T)).min() <= 0.0:
            raise InvalidGame("own-variable block of Q is not positive definite")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "c", _frozen(c))

    @property
    def block(self) -> slice:
        return slice(self.block_start, self.block_start + self.block_size)

    def cost(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x)


@dataclass(frozen=True)
class SharedConstraints:
    """Shared constraints ``A x <= b`` and ``E x = f`` (either may be empty)."""

    A: np.ndarray
    b: np.ndarray
    E: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        E = np.array(self.E, dtype=float)
        b = np.array(self.b, dtype=float).ravel()
        f = np.array(self.f, dtype=float).ravel()
        if A.ndim != 2 or E.ndim != 2:
            raise DimensionMismatch("A and E must be 2-D (use shape (0, n) when empty)")
        if A.shape[1] != E.shape[1]:
            raise DimensionMismatch(f"A has {A.shape[1]} columns, E has {E.shape[1]}")
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows, b has {b.shape[0]} entries")
        if E.shape[0] != f.shape[0]:
            raise DimensionMismatch(f"E has {E.shape[0]} rows, f has {f.shape[0]} entries")
        zero_rows = ~np.any(A != 0.0, axis=1)
        bad = np.flatnonzero(zero_rows & (b < 0))
        if bad.size:
            raise InvalidGame(f"rows {bad.tolist()} of A are zero with negative b (0 <= b < 0)")
        for name, val in (("A", A), ("b", b), ("E", E), ("f", f)):
            object.__setattr__(self, name, _frozen(val))

    @classmethod
    def build(cls, n: int, A=None, b=None, E=None, f=None) -> "SharedConstraints":
        A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)
        E = np.zeros((0, n)) if E is None else np.atleast_2d(np.asarray(E, dtype=float)).reshape(-1, n)
        b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
        f = np.zeros(0) if f is None else np.atleast_1d(np.asarray(f, dtype=float))
        return cls(A, b, E, f)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.E.shape[0]


@dataclass(frozen=True)
class LQGame:
    """An N-player LQ game with shared constraints.

    ``lower_bounds`` is optional metadata: finite lower bounds on ``x`` that are
    implied by the constraints, needed only by the primal LCP reformulation.
    """

    players: tuple[PlayerCost, ...]
    constraints: SharedConstraints
    lower_bounds: np.ndarray | None = field(default=None)

    def __post_init__(self):
        players = tuple(self.players)
        if not players:
            raise InvalidGame("a game needs at least one player")
        object.__setattr__(self, "players", players)
        n = self.constraints.n
        start = 0
        for i, p in enumerate(players):
            if p.Q.shape[0] != n:
                raise DimensionMismatch(f"player {i}: Q is {p.Q.shape[0]}x{p.Q.shape[0]}, expected {n}x{n}")
            if p.block_start != start:
                raise InvalidGame(f"player {i} block starts at {p.block_start}, expected {start}")
            start += p.block_size
        if start != n:
            raise InvalidGame(f"player blocks cover {start} of {n} variables")
        if self.lower_bounds is not None:
            lb = _frozen(np.ravel(self.lower_bounds))
            if lb.shape[0] != n:
                raise DimensionMismatch(f"lower_bounds has length {lb.shape[0]}, expected {n}")
            object.__setattr__(self, "lower_bounds", lb)

    @classmethod
    def from_arrays(
        cls,
        Qs: Sequence[np.ndarray],
        cs: Sequence[np.ndarray],
        sizes: Sequence[int],
        A=None,
        b=None,
        E=None,
        f=None,
        lower_bounds=None,
    ) -> "LQGame":
        if not (len(Qs) == len(cs) == len(sizes)):
            raise DimensionMismatch("Qs, cs and sizes must have one entry per player")
        n = int(sum(sizes))
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
        players = tuple(PlayerCost(Q, c, int(s), int(k)) for Q, c, s, k in zip(Qs, cs, starts, sizes))
        return cls(players, SharedConstraints.build(n, A, b, E, f), lower_bounds)

    @property
    def N(self) -> int:
        return len(self.players)

    @property
    def n(self) -> int:
        return self.constraints.n

    @property
    def sizes(self) -> list[int]:
        return [p.block_size for p in self.players]

    def with_constraints(self, constraints: SharedConstraints) -> "LQGame":
        return LQGame(self.players, constraints, self.lower_bounds)


@dataclass(frozen=True)
class Pseudogradient:
    """Affine map ``F(x) = G x + g``; ``G`` is non-symmetric in general."""

    G: np.ndarray
    g: np.ndarray

    @property
    def Gs(self) -> np.ndarray:
        return 0.5 * (self.G + self.G.T)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.G @ x + self.g


@dataclass(frozen=True)
class ValidationReport:
    monotone: bool
    min_eig_Gs: float
    equality_rank: int = 0
    equalities_consistent: bool = True
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.monotone and self.equalities_consistent


def assemble_pseudogradient(game: LQGame) -> Pseudogradient:
    """Stack each player's own rows of ``Q_i`` and ``c_i``."""
    n = game.n
    G = np.empty((n, n))
    g = np.empty(n)
    for i, p in enumerate(game.players):
        if p.Q.shape != (n, n):
            raise DimensionMismatch(f"player {i}: Q is {p.Q.shape}, expected {(n, n)}")
        G[p.block] = p.Q[p.block]
        g[p.block] = p.c[p.block]
    return Pseudogradient(_frozen(G), _frozen(g))


def check_strong_monotonicity(F: Pseudogradient, margin: float = 0.0) -> ValidationReport:
    """Smallest eigenvalue of the symmetric part of ``G`` versus ``margin``.

    Values within ``1e-12 * ||G||_inf`` of zero do not count as positive.
    """
    G = np.asarray(F.G)
    if G.shape[0] == 0:
        return ValidationReport(True, float("inf"))
    lam = float(np.linalg.eigvalsh(F.Gs)[0])
    thresh = max(margin, EIG_TOL * _norm_inf(G))
    monotone = lam > thresh
    msgs = () if monotone else (f"symmetric part of G has min eigenvalue {lam:.6g} <= {thresh:.3g}",)
    return ValidationReport(monotone, lam, messages=msgs)


def independent_equality_rows(C: SharedConstraints) -> np.ndarray:
    """Indices of a maximal independent subset of the rows of ``[E, -f]``.

    Rows are scaled to unit max-norm and picked by pivoted QR of the
    transpose; the result is sorted.

    Raises
    ------
    InconsistentEqualities
        If ``rank([E, -f]) > rank(E)``.
    """
    E, f = C.E, C.f
    q, n = E.shape
    Aug = np.hstack([E, -f[:, None]])
    scale = np.abs(Aug).max(axis=1) if q else np.zeros(0)
    rows = np.flatnonzero(scale > 0.0)
    if rows.size == 0:
        return rows
    Aug = Aug[rows] / scale[rows, None]
    tol = RANK_TOL * max(q, n + 1) * _norm_inf(Aug)
    qr = qr_pivot(Aug.T, tol)
    sel = np.sort(qr.col_perm[: qr.rank])
    rank_E = qr_pivot(Aug[sel, :n].T, tol).rank
    if rank_E < sel.size:
        raise InconsistentEqualities(
            f"rank(E)={rank_E} < rank([E -f])={sel.size}: equality constraints are infeasible"
        )
    return rows[sel]


def preprocess_equalities(C: SharedConstraints) -> SharedConstraints:
    """Drop linearly dependent equality rows, keeping the solution set of
    ``E x = f``.  Kept rows are returned unscaled in their original order, and
    a full-row-rank ``E`` is returned unchanged.
    """
    keep = independent_equality_rows(C)
    if keep.size == C.q:
        return C
    return SharedConstraints(C.A, C.b, C.E[keep], C.f[keep])


def validate_game(game: LQGame, margin: float = 0.0) -> ValidationReport:
    """Collect monotonicity and equality-consistency diagnostics; never raises."""
    msgs: list[str] = []
    try:
        F = assemble_pseudogradient(game)
    except DimensionMismatch as exc:
        return ValidationReport(False, float("nan"), 0, False, (str(exc),))
    mono = check_strong_monotonicity(F, margin)
    msgs.extend(mono.messages)
    consistent = True
    rank = 0
    try:
        rank = preprocess_equalities(game.constraints).q
    except InconsistentEqualities as exc:
        consistent = False
        msgs.append(str(exc))
    if rank < game.constraints.q and consistent:
        msgs.append(f"{game.constraints.q - rank} redundant equality rows")
    return ValidationReport(mono.monotone, mono.min_eig_Gs, rank, consistent, tuple(msgs))
