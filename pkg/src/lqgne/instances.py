"""Random strongly monotone LQ games with box bounds and coupling constraints.

Random numbers come from ``CounterRNG``: Philox4x64-10 keyed by
``seed + 2**64 * stream`` and consumed as raw 64-bit words, with

* ``U[a, b)``: ``a + (b - a) * (w >> 11) * 2**-53``;
* ``N(mu, sigma)``: Box-Muller on two consecutive words,
  ``sqrt(-2 log u1) * cos(2 pi u2)`` with ``u1 = ((w1 >> 11) + 1) * 2**-53``
  and ``u2 = (w2 >> 11) * 2**-53`` (the sine branch is discarded).

Arrays are filled in row-major order, so the stream of draws is fully
specified by the order of calls in ``random_instance``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import LQGame

_MASK64 = (1 << 64) - 1
_TWO53 = 2.0 ** -53


class CounterRNG:
    """Reproducible generator built on Philox4x64-10 raw words."""

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= seed <= _MASK64 or not 0 <= stream <= _MASK64:
            raise ValueError("seed and stream must be unsigned 64-bit integers")
        self.seed = seed
        self.stream = stream
        self._bg = np.random.Philox(key=seed | (stream << 64))

    def raw(self, size: int) -> np.ndarray:
        return np.asarray(self._bg.random_raw(size), dtype=np.uint64).reshape(-1)

    def _unit(self, count: int) -> np.ndarray:
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * _TWO53

    def uniform(self, a: float, b: float, shape=()) -> np.ndarray:
        count = int(np.prod(shape))
        return (a + (b - a) * self._unit(count)).reshape(shape)

    def normal(self, mu: float = 0.0, sigma: float = 1.0, shape=()) -> np.ndarray:
        count = int(np.prod(shape))
        w = (self.raw(2 * count) >> np.uint64(11)).astype(np.float64).reshape(count, 2)
        u1 = (w[:, 0] + 1.0) * _TWO53
        u2 = w[:, 1] * _TWO53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return (mu + sigma * z).reshape(shape)


@dataclass(frozen=True)
class GenConfig:
    """Size and distribution knobs of a random game.

    ``n_coupling=None`` means one dense coupling row per agent.  With
    ``box_bounds`` the ``2 N n_per_agent`` bound rows come first in ``A``
    (upper bounds, then lower bounds), followed by the coupling rows.
    """

    N: int
    n_per_agent: int = 5
    q: int = 0
    n_coupling: int | None = None
    box_bounds: bool = True
    seed: int = 0
    c_sigma: float = 5.0
    ub_range: tuple[float, float] = (0.1, 1.0)
    lb_range: tuple[float, float] = (-1.0, -0.1)
    slack_range: tuple[float, float] = (0.1, 0.5)
    shift: float = 1e-4

    def __post_init__(self):
        if self.N < 1 or self.n_per_agent < 1:
            raise ValueError("need at least one agent with one variable")
        if self.q < 0 or (self.n_coupling is not None and self.n_coupling < 0):
            raise ValueError("constraint counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.N * self.n_per_agent

    @property
    def coupling_rows(self) -> int:
        return self.N if self.n_coupling is None else self.n_coupling

    @property
    def m(self) -> int:
        return self.coupling_rows + (2 * self.n if self.box_bounds else 0)


def preset_config(N: int, seed: int = 0, equalities: bool = False) -> GenConfig:
    """Five variables per agent, box bounds plus ``N`` coupling rows, and
    ``floor(N/2)`` equalities when requested."""
    return GenConfig(N=N, n_per_agent=5, q=N // 2 if equalities else 0, seed=seed)


@dataclass(frozen=True)
class GeneratedInstance:
    game: LQGame
    x0: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    config: GenConfig = field(repr=False)


def random_instance(cfg: GenConfig) -> GeneratedInstance:
    N, k, n = cfg.N, cfg.n_per_agent, cfg.n
    rng = CounterRNG(cfg.seed)
    Qt = []
    for _ in range(N):
        B = rng.normal(0.0, 1.0, (n, n))
        Qt.append(B.T @ B)
    Gt = np.vstack([Qt[i][i * k:(i + 1) * k] for i in range(N)])
    lam_min = float(np.linalg.eigvalsh(0.5 * (Gt + Gt.T))[0])
    delta = max(-lam_min, 0.0) + cfg.shift
    Qs = [Q + delta * np.eye(n) for Q in Qt]
    cs = [rng.normal(0.0, cfg.c_sigma, n) for _ in range(N)]
    ub = rng.uniform(*cfg.ub_range, (n,))
    lb = rng.uniform(*cfg.lb_range, (n,))
    Ac = rng.normal(0.0, 1.0, (cfg.coupling_rows, n))
    E = rng.normal(0.0, 1.0, (cfg.q, n))
    x0 = lb + (ub - lb) * rng.uniform(0.0, 1.0, (n,))
    bt = rng.uniform(*cfg.slack_range, (cfg.coupling_rows,))
    f = E @ x0
    bc = Ac @ x0 + bt
    if cfg.box_bounds:
        I = np.eye(n)
        A = np.vstack([I, -I, Ac])
        b = np.concatenate([ub, -lb, bc])
        lower = lb
    else:
        A, b, lower = Ac, bc, None
    game = LQGame.from_arrays(Qs, cs, [k] * N, A, b, E, f, lower)
    return GeneratedInstance(game, x0, lb, ub, cfg)


def random_game(cfg: GenConfig) -> LQGame:
    return random_instance(cfg).game
