"""Game-theoretic linear MPC on a coupled LTI plant.

Each agent owns a slice of the input vector and minimizes, over its own input
increments and a scalar slack, a tracking cost on the common output
prediction.  Condensing the prediction turns every MPC step into an
``LQGame`` over

    z = (du_1(0..T-1), eps_1, ..., du_N(0..T-1), eps_N)

with shared soft output bounds and local hard input bounds.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidGame, SingularDCGain
from .game import LQGame, assemble_pseudogradient, check_strong_monotonicity
from .goldnash import OPTIMAL, SolverOptions
from .instances import CounterRNG
from .io import fmt
from .solvers import run_solver

log = logging.getLogger(__name__)

SPECTRAL_RADIUS = 0.95
DC_RETRIES = 20
# tighter than the generic default so hard input rows hold to round-off
MPC_OPTIONS = SolverOptions(eps=1e-12)


@dataclass(frozen=True)
class LTIPlant:
    """``x+ = A x + B u``, ``y = C x`` with per-agent input/output slices."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    input_blocks: tuple[slice, ...]
    output_blocks: tuple[slice, ...]

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]

    @property
    def ny(self) -> int:
        return self.C.shape[0]

    @property
    def N(self) -> int:
        return len(self.input_blocks)

    def dc_gain(self) -> np.ndarray:
        return self.C @ np.linalg.solve(np.eye(self.nx) - self.A, self.B)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


def _companion(poles: np.ndarray) -> np.ndarray:
    a = np.poly(poles)  # monic, a[0] = 1
    k = len(poles)
    M = np.zeros((k, k))
    M[0, :] = -a[1:]
    M[1:, :-1] = np.eye(k - 1)
    return M


def _draw_plant(rng: CounterRNG, N: int, ns: int, nio: int, sigma: float):
    nx, nu = N * ns, N * nio
    A = np.zeros((nx, nx))
    B = np.zeros((nx, nu))
    C = np.zeros((nu, nx))
    for i in range(N):
        xs, us = slice(i * ns, (i + 1) * ns), slice(i * nio, (i + 1) * nio)
        A[xs, xs] = _companion(rng.uniform(0.2, 0.9, (ns,)))
        B[xs, us] = rng.normal(0.0, 1.0, (ns, nio))
        C[us, xs] = rng.normal(0.0, 1.0, (nio, ns))
    if sigma > 0:
        A = A + rng.normal(0.0, sigma, (nx, nx))
        B = B + rng.normal(0.0, sigma, (nx, nu))
        C = C + rng.normal(0.0, sigma, (nu, nx))
    return A, B, C


def random_plant(seed: int = 0, N: int = 3, states_per_agent: int = 3, coupling_sigma: float = 0.02,
                 inputs_per_agent: int = 2, stream: int = 0) -> LTIPlant:
    """Block-diagonal-dominant plant with ``rho(A) = 0.95`` and unit DC gain.

    Each agent block is a controllable-canonical system with random real
    poles in ``[0.2, 0.9]`` and ``N(0,1)`` input/output maps; every entry of
    ``A, B, C`` then gets ``N(0, coupling_sigma^2)`` noise.  A singular DC gain
    is retried on the next substream.
    """
    if N < 1 or states_per_agent < 1 or inputs_per_agent < 1:
        raise ValueError("plant dimensions must be positive")
    for s in range(stream, stream + DC_RETRIES):
        A, B, C = _draw_plant(CounterRNG(seed, s), N, states_per_agent, inputs_per_agent, coupling_sigma)
        A = A * (SPECTRAL_RADIUS / float(np.max(np.abs(np.linalg.eigvals(A)))))
        Gdc = C @ np.linalg.solve(np.eye(A.shape[0]) - A, B)
        if np.linalg.cond(Gdc) > 1e10:
            log.info("singular DC gain on seed %d stream %d, retrying", seed, s)
            continue
        C = np.linalg.solve(Gdc, C)
        blocks = tuple(slice(i * inputs_per_agent, (i + 1) * inputs_per_agent) for i in range(N))
        return LTIPlant(A, B, C, blocks, blocks)
    raise SingularDCGain(f"DC gain singular on {DC_RETRIES} consecutive substreams (seed {seed})")


@dataclass(frozen=True)
class MPCAgentSpec:
    Qy: np.ndarray
    Qdu: np.ndarray
    Qeps: float
    Qeps2: float
    u_min: np.ndarray
    u_max: np.ndarray
    du_min: np.ndarray
    du_max: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray
    T: int

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("horizon must be at least 1")
        if np.any(np.diag(self.Qy) < 0) or np.any(self.Qy != np.diag(np.diag(self.Qy))):
            raise ValueError("Qy must be diagonal with nonnegative entries")
        if np.linalg.eigvalsh(0.5 * (self.Qdu + self.Qdu.T))[0] <= 0:
            raise ValueError("Qdu must be positive definite")
        if not self.Qeps2 > 0:
            raise ValueError("Qeps2 must be positive")


def benchmark_specs(plant: LTIPlant, T: int = 10) -> list[MPCAgentSpec]:
    """Weights and bounds of the 3-agent benchmark for any plant shape."""
    specs = []
    for i in range(plant.N):
        d = np.ones(plant.ny)
        d[plant.output_blocks[i]] = 1.5
        nui = plant.input_blocks[i].stop - plant.input_blocks[i].start
        specs.append(MPCAgentSpec(
            Qy=np.diag(d), Qdu=0.1 * np.eye(nui), Qeps=1e3, Qeps2=1e-3,
            u_min=np.full(nui, -3.0), u_max=np.full(nui, 3.0),
            du_min=np.full(nui, -2.0), du_max=np.full(nui, 2.0),
            y_min=np.zeros(plant.ny), y_max=np.full(plant.ny, 2.0), T=T))
    return specs


def benchmark_setpoint(ny: int = 6) -> np.ndarray:
    return np.tile([1.0, 2.0], (ny + 1) // 2)[:ny]


def prediction_matrices(plant: LTIPlant, T: int) -> tuple[np.ndarray, np.ndarray]:
    """``Phi, Gamma`` with ``y(1..T) = Phi x_e + Gamma du(0..T-1)`` (stacked by time)."""
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    Ae = np.block([[plant.A, plant.B], [np.zeros((nu, nx)), np.eye(nu)]])
    Be = np.vstack([plant.B, np.eye(nu)])
    Ce = np.hstack([plant.C, np.zeros((ny, nu))])
    Phi = np.zeros((T * ny, nx + nu))
    Gamma = np.zeros((T * ny, T * nu))
    # H[k] = Ce Ae^k Be (Markov parameters of the increment system)
    H = []
    P = Ae.copy()
    M = Be.copy()
    for k in range(T):
        Phi[k * ny:(k + 1) * ny] = Ce @ P
        H.append(Ce @ M)
        P = Ae @ P
        M = Ae @ M
    for k in range(T):
        for j in range(k + 1):
            Gamma[k * ny:(k + 1) * ny, j * nu:(j + 1) * nu] = H[k - j]
    return Phi, Gamma


@dataclass(frozen=True)
class CondensedGame:
    game: LQGame
    Phi: np.ndarray
    Gamma: np.ndarray
    # du (stacked by time) = S z
    S: np.ndarray
    eps_index: np.ndarray
    T: int
    nu: int

    def increments(self, z: np.ndarray) -> np.ndarray:
        """Input increments as a ``(T, nu)`` array."""
        return (self.S @ z).reshape(self.T, self.nu)

    def slacks(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z)[self.eps_index]

    def predicted_outputs(self, z: np.ndarray, x_e: np.ndarray) -> np.ndarray:
        """Predicted ``y(1..T)`` as a ``(T, ny)`` array."""
        return (self.Phi @ x_e + self.Gamma @ (self.S @ z)).reshape(self.T, -1)


def _shared(specs: Sequence[MPCAgentSpec], name: str) -> np.ndarray:
    v = np.asarray(getattr(specs[0], name), dtype=float)
    for s in specs[1:]:
        if not np.array_equal(np.asarray(getattr(s, name), dtype=float), v):
            raise ValueError(f"agents disagree on shared parameter {name}")
    return v


def condense(plant: LTIPlant, specs: Sequence[MPCAgentSpec], x_e: np.ndarray, r: np.ndarray,
             Phi: np.ndarray | None = None, Gamma: np.ndarray | None = None) -> CondensedGame:
    """Build the per-step game for extended state ``x_e = [x; u(t-1)]``.

    Row order of ``A``: shared upper output bounds (time-major), shared lower
    output bounds, then per agent its increment box, cumulative input bounds
    and ``eps_i >= 0``.  ``Phi``/``Gamma`` may be passed to skip rebuilding.
    """
    N, nu, ny = plant.N, plant.nu, plant.ny
    if len(specs) != N:
        raise DimensionMismatch(f"{len(specs)} agent specs for {N} agents")
    T = specs[0].T
    if any(s.T != T for s in specs):
        raise ValueError("agents must share the horizon")
    x_e = np.asarray(x_e, dtype=float)
    r = np.asarray(r, dtype=float)
    if x_e.shape != (plant.nx + nu,):
        raise DimensionMismatch(f"x_e has shape {x_e.shape}, expected ({plant.nx + nu},)")
    if r.shape != (ny,):
        raise DimensionMismatch(f"r has shape {r.shape}, expected ({ny},)")
    for i, s in enumerate(specs):
        k = plant.input_blocks[i].stop - plant.input_blocks[i].start
        if s.Qy.shape != (ny, ny) or s.Qdu.shape != (k, k):
            raise DimensionMismatch(f"agent {i} weights do not match the plant")
        for v in (s.u_min, s.u_max, s.du_min, s.du_max):
            if np.shape(v) != (k,):
                raise DimensionMismatch(f"agent {i} input bounds must have length {k}")
    y_min, y_max = _shared(specs, "y_min"), _shared(specs, "y_max")
    if y_min.shape != (ny,) or y_max.shape != (ny,):
        raise DimensionMismatch(f"output bounds must have length {ny}")
    if Phi is None or Gamma is None:
        Phi, Gamma = prediction_matrices(plant, T)

    sizes = [T * (b.stop - b.start) + 1 for b in plant.input_blocks]
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    nz = int(sum(sizes))
    S = np.zeros((T * nu, nz))
    eps_index = np.zeros(N, dtype=int)
    for i, blk in enumerate(plant.input_blocks):
        k = blk.stop - blk.start
        for t in range(T):
            for a in range(k):
                S[t * nu + blk.start + a, starts[i] + t * k + a] = 1.0
        eps_index[i] = starts[i] + T * k

    GS = Gamma @ S
    free = Phi @ x_e - np.tile(r, T)
    Qs, cs = [], []
    for i, s in enumerate(specs):
        Qbar = np.kron(np.eye(T), s.Qy)
        WG = Qbar @ GS
        Q = 2.0 * GS.T @ WG
        c = 2.0 * WG.T @ free
        k = plant.input_blocks[i].stop - plant.input_blocks[i].start
        own = slice(starts[i], starts[i] + T * k)
        Q[own, own] += 2.0 * np.kron(np.eye(T), s.Qdu)
        e = eps_index[i]
        Q[e, e] += 2.0 * s.Qeps2
        c[e] += s.Qeps
        Qs.append(0.5 * (Q + Q.T))
        cs.append(c)

    # shared soft output bounds
    epscols = np.zeros((T * ny, nz))
    epscols[:, eps_index] = 1.0
    y_free = Phi @ x_e
    rows = [GS - epscols, -GS - epscols]
    rhs = [np.tile(y_max, T) - y_free, y_free - np.tile(y_min, T)]
    lower = np.full(nz, -np.inf)
    u_prev = x_e[plant.nx:]
    for i, (s, blk) in enumerate(zip(specs, plant.input_blocks)):
        k = blk.stop - blk.start
        own = np.arange(starts[i], starts[i] + T * k)
        D = np.zeros((T * k, nz))
        D[np.arange(T * k), own] = 1.0
        # cumulative sums: u_i(t) = u_i(-1) + sum_{j<=t} du_i(j)
        L = np.kron(np.tril(np.ones((T, T))), np.eye(k))
        Cum = np.zeros((T * k, nz))
        Cum[:, own] = L
        up = np.tile(u_prev[blk], T)
        eps_row = np.zeros((1, nz))
        eps_row[0, eps_index[i]] = -1.0
        rows += [D, -D, Cum, -Cum, eps_row]
        rhs += [np.tile(s.du_max, T), -np.tile(s.du_min, T),
                np.tile(s.u_max, T) - up, up - np.tile(s.u_min, T), np.zeros(1)]
        lower[own] = np.tile(s.du_min, T)
        lower[eps_index[i]] = 0.0
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    game = LQGame.from_arrays(Qs, cs, sizes, A, b, lower_bounds=lower)
    return CondensedGame(game, Phi, Gamma, S, eps_index, T, nu)


def monotonicity_margin(plant: LTIPlant, specs: Sequence[MPCAgentSpec]) -> float:
    """Smallest eigenvalue of the symmetric part of the condensed pseudogradient.

    The Hessians do not depend on the state or the set-point, so one
    condensation at the origin suffices.
    """
    cg = condense(plant, specs, np.zeros(plant.nx + plant.nu), np.zeros(plant.ny))
    return check_strong_monotonicity(assemble_pseudogradient(cg.game)).min_eig_Gs


def benchmark_setup(seed: int = 0, T: int = 10, N: int = 3, max_tries: int = 20):
    """Plant and specs of the benchmark, regenerating until strongly monotone."""
    for stream in range(0, max_tries * DC_RETRIES, DC_RETRIES):
        plant = random_plant(seed, N=N, stream=stream)
        specs = benchmark_specs(plant, T)
        margin = monotonicity_margin(plant, specs)
        if margin > 0:
            return plant, specs
        log.warning("condensed game not strongly monotone (min eig %.3e), regenerating plant", margin)
    raise InvalidGame(f"no strongly monotone plant after {max_tries} attempts (seed {seed})")


@dataclass(frozen=True)
class StepRecord:
    step: int
    status: str
    wall_ms: float
    iterations: int
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    r: np.ndarray
    eps: np.ndarray
    du: np.ndarray
    # predicted y(1) of the solved game, for soft-constraint checks
    y_pred: np.ndarray


@dataclass
class ClosedLoopTrace:
    nx: int
    nu: int
    ny: int
    neps: int
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def _stack(self, name: str, width: int) -> np.ndarray:
        if not self.records:
            return np.zeros((0, width))
        return np.array([getattr(r, name) for r in self.records])

    @property
    def X(self) -> np.ndarray:
        return self._stack("x", self.nx)

    @property
    def U(self) -> np.ndarray:
        return self._stack("u", self.nu)

    @property
    def Y(self) -> np.ndarray:
        return self._stack("y", self.ny)

    @property
    def DU(self) -> np.ndarray:
        return self._stack("du", self.nu)

    @property
    def EPS(self) -> np.ndarray:
        return self._stack("eps", self.neps)

    @property
    def statuses(self) -> list[str]:
        return [r.status for r in self.records]

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        buf.write(f"# nx={self.nx},nu={self.nu},ny={self.ny},neps={self.neps}\n")
        w = csv.writer(buf, lineterminator="\n")
        head = ["step", "status", "wall_ms", "iterations"]
        for name, k in (("x", self.nx), ("u", self.nu), ("y", self.ny), ("r", self.ny), ("eps", self.neps)):
            head += [f"{name}{j + 1}" for j in range(k)]
        w.writerow(head)
        for rec in self.records:
            line = [rec.step, rec.status, fmt(rec.wall_ms) if timing else "nan", rec.iterations]
            for v in (rec.x, rec.u, rec.y, rec.r, rec.eps):
                line += [fmt(float(a)) for a in v]
            w.writerow(line)
        return buf.getvalue()


def closed_loop(plant: LTIPlant, specs: Sequence[MPCAgentSpec], x0: np.ndarray, steps: int,
                solver: str = "goldnash", r: np.ndarray | Callable[[int], np.ndarray] | None = None,
                u0: np.ndarray | None = None, options: SolverOptions | None = None) -> ClosedLoopTrace:
    """Receding-horizon simulation.

    Step ``t`` records ``x(t)``, the applied ``u(t) = u(t-1) + du*(0)``,
    ``y(t) = C x(t)`` and the set-point.  A non-optimal solve is recorded
    and the input is held (``du = 0``).
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    options = options or MPC_OPTIONS
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (plant.nx,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, expected ({plant.nx},)")
    u_prev = np.zeros(plant.nu) if u0 is None else np.asarray(u0, dtype=float).copy()
    if r is None:
        r = benchmark_setpoint(plant.ny)
    ref = r if callable(r) else (lambda _t, _r=np.asarray(r, dtype=float): _r)
    trace = ClosedLoopTrace(plant.nx, plant.nu, plant.ny, plant.N)
    if steps == 0:
        return trace
    margin = monotonicity_margin(plant, specs)
    if not margin > 0:
        raise InvalidGame(f"condensed game is not strongly monotone (min eig {margin:.3e})")
    Phi, Gamma = prediction_matrices(plant, specs[0].T)
    for t in range(steps):
        rt = np.asarray(ref(t), dtype=float)
        x_e = np.concatenate([x, u_prev])
        cg = condense(plant, specs, x_e, rt, Phi, Gamma)
        t0 = time.perf_counter()
        try:
            res = run_solver(solver, cg.game, options)
            status, iters = res.status, res.iterations
        except Exception as exc:  # recorded, loop continues
            log.warning("step %d: solver %s raised %s", t, solver, exc)
            res, status, iters = None, "error", 0
        ms = 1e3 * (time.perf_counter() - t0)
        if res is not None and status == OPTIMAL:
            z = res.x
            du = cg.increments(z)[0]
            eps = cg.slacks(z)
            y_pred = cg.predicted_outputs(z, x_e)[0]
        else:
            log.warning("step %d: status %s, holding input", t, status)
            du = np.zeros(plant.nu)
            eps = np.full(plant.N, np.nan)
            y_pred = np.full(plant.ny, np.nan)
        u = u_prev + du
        trace.records.append(StepRecord(t, status, ms, iters, x.copy(), u.copy(), plant.C @ x,
                                        rt.copy(), eps, du, y_pred))
        x = plant.A @ x + plant.B @ u
        u_prev = u
    return trace
