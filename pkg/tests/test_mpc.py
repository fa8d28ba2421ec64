import numpy as np
import pytest

from lqgne.errors import DimensionMismatch
from lqgne.game import assemble_pseudogradient
from lqgne.goldnash import OPTIMAL, solve
from lqgne.gtmpc import (
    MPC_OPTIONS,
    closed_loop,
    condense,
    benchmark_setpoint,
    benchmark_setup,
    benchmark_specs,
    random_plant,
)


@pytest.fixture(scope="module")
def setup():
    return benchmark_setup(0, 10)


def test_plant_dimensions_and_normalization():
    p = random_plant(3)
    assert (p.nx, p.nu, p.ny) == (9, 6, 6)
    assert abs(p.spectral_radius() - 0.95) <= 1e-9
    assert np.abs(p.dc_gain() - np.eye(6)).max() <= 1e-9


def test_plant_decoupled_is_block_diagonal():
    p = random_plant(4, coupling_sigma=0.0)
    mask_x = np.kron(np.eye(3), np.ones((3, 3))) == 0
    mask_b = np.kron(np.eye(3), np.ones((3, 2))) == 0
    assert np.all(p.A[mask_x] == 0) and np.all(p.B[mask_b] == 0) and np.all(p.C[mask_b.T] == 0)


def test_plant_seeds_are_reproducible():
    assert np.array_equal(random_plant(5).A, random_plant(5).A)
    assert not np.array_equal(random_plant(5).A, random_plant(6).A)


def test_condensed_sizes(setup):
    plant, specs = setup
    cg = condense(plant, specs, np.zeros(15), benchmark_setpoint())
    assert cg.game.n == 63 and cg.game.constraints.q == 0
    # 120 shared output rows, then per agent 2*20 increment, 2*20 input and 1 slack row
    assert cg.game.constraints.m == 120 + 3 * 81


def _simulate(plant, x_e, du):
    x, u = x_e[:plant.nx].copy(), x_e[plant.nx:].copy()
    ys, us = [], []
    for d in du:
        u = u + d
        x = plant.A @ x + plant.B @ u
        ys.append(plant.C @ x)
        us.append(u.copy())
    return np.array(ys), np.array(us)


def test_condensing_matches_simulation(setup):
    plant, specs = setup
    rng = np.random.default_rng(0)
    T = specs[0].T
    x_e = rng.normal(size=15)
    r = benchmark_setpoint()
    cg = condense(plant, specs, x_e, r)

    def cost(i, z):
        du = cg.increments(z)
        y, _ = _simulate(plant, x_e, du)
        s = specs[i]
        blk = plant.input_blocks[i]
        e = cg.slacks(z)[i]
        return (sum((yk - r) @ s.Qy @ (yk - r) for yk in y)
                + sum(d[blk] @ s.Qdu @ d[blk] for d in du) + s.Qeps * e + s.Qeps2 * e * e)

    def model(i, z):
        p = cg.game.players[i]
        return 0.5 * z @ p.Q @ z + p.c @ z

    z1, z2 = rng.normal(size=63), rng.normal(size=63)
    for i in range(3):
        assert cost(i, z1) - cost(i, z2) == pytest.approx(model(i, z1) - model(i, z2), rel=1e-10)

    y, u = _simulate(plant, x_e, cg.increments(z1))
    assert np.allclose(cg.predicted_outputs(z1, x_e), y, atol=1e-10)
    C = cg.game.constraints
    slack = C.A @ z1 - C.b
    se = cg.slacks(z1).sum()
    assert np.allclose(slack[:60], (y - 2.0 - se).ravel(), atol=1e-10)
    assert np.allclose(slack[60:120], (0.0 - y - se).ravel(), atol=1e-10)
    # first agent's cumulative upper input rows
    own_u = u[:, plant.input_blocks[0]].ravel()
    assert np.allclose(slack[120 + 2 * T * 2: 120 + 3 * T * 2], own_u - 3.0, atol=1e-10)


def test_equilibrium_setpoint_needs_no_slack():
    plant = random_plant(1)
    specs = benchmark_specs(plant, 5)
    wide = [s.__class__(**{**s.__dict__, "y_min": np.full(6, -100.0), "y_max": np.full(6, 100.0)}) for s in specs]
    u_ss = np.array([0.5, 1.0, -0.5, 0.2, 0.1, 1.5])
    x_ss = np.linalg.solve(np.eye(9) - plant.A, plant.B @ u_ss)
    cg = condense(plant, wide, np.concatenate([x_ss, u_ss]), plant.C @ x_ss)
    res = solve(cg.game, MPC_OPTIONS)
    assert res.status == OPTIMAL
    assert np.abs(cg.slacks(res.x)).max() <= 1e-12
    assert np.abs(cg.increments(res.x)).max() <= 1e-9


def test_potential_case_is_symmetric():
    plant = random_plant(2, coupling_sigma=0.0)
    specs = benchmark_specs(plant, 1)
    same = [s.__class__(**{**s.__dict__, "Qy": np.eye(6)}) for s in specs]
    G = assemble_pseudogradient(condense(plant, same, np.zeros(15), benchmark_setpoint()).game).G
    assert np.abs(G - G.T).max() <= 1e-10


def test_condense_dimension_errors(setup):
    plant, specs = setup
    with pytest.raises(DimensionMismatch):
        condense(plant, specs, np.zeros(14), benchmark_setpoint())
    with pytest.raises(DimensionMismatch):
        condense(plant, specs[:2], np.zeros(15), benchmark_setpoint())


def test_closed_loop_origin_stays_put(setup):
    plant, specs = setup
    tr = closed_loop(plant, specs, np.zeros(9), 5, r=np.zeros(6))
    assert tr.statuses == [OPTIMAL] * 5
    # the unconstrained slack optimum is -2.5e5, so zero is reached through pivots
    assert np.abs(tr.X).max() <= 1e-10 and np.abs(tr.DU).max() <= 1e-10


def test_closed_loop_empty(setup):
    plant, specs = setup
    tr = closed_loop(plant, specs, np.zeros(9), 0)
    assert len(tr) == 0 and tr.X.shape == (0, 9)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "# nx=9,nu=6,ny=6,neps=3" and len(lines) == 2


def test_closed_loop_benchmark_run(setup):
    plant, specs = setup
    tr = closed_loop(plant, specs, np.zeros(9), 15)
    assert tr.statuses == [OPTIMAL] * 15
    assert np.abs(tr.U).max() <= 3.0 + 1e-12
    assert np.abs(tr.DU).max() <= 2.0 + 1e-12
    for rec in tr.records:
        se = rec.eps.sum()
        assert rec.y_pred.max() <= 2.0 + se + 1e-8 and rec.y_pred.min() >= -se - 1e-8
    head = tr.to_csv(timing=False).splitlines()[1].split(",")
    assert head[:6] == ["step", "status", "wall_ms", "iterations", "x1", "x2"] and head[-1] == "eps3"
    assert len(head) == 4 + 9 + 6 + 6 + 6 + 3


def test_closed_loop_fallback_on_failure(setup, monkeypatch):
    import lqgne.gtmpc as mod

    def broken(*a, **k):
        raise RuntimeError("no")

    plant, specs = setup
    monkeypatch.setattr(mod, "run_solver", broken)
    tr = closed_loop(plant, specs, np.zeros(9), 3)
    assert tr.statuses == ["error"] * 3 and np.all(tr.U == 0.0)
