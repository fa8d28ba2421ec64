import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqgne import bench
from lqgne.bench import CSV_HEADER, benchmark_sweep
from lqgne.game import assemble_pseudogradient, check_strong_monotonicity, validate_game
from lqgne.instances import CounterRNG, GenConfig, preset_config, random_instance
from lqgne.io import dumps, game_to_dict


def test_rng_formulas_from_raw_words():
    words = np.random.Philox(key=12345 | (3 << 64)).random_raw(8)
    rng = CounterRNG(12345, 3)
    u = rng.uniform(2.0, 5.0, (4,))
    expect = [2.0 + 3.0 * (int(w) >> 11) / 2**53 for w in words[:4]]
    assert u.tolist() == expect
    zs = rng.normal(0.0, 1.0, (2,))
    w = [int(v) for v in words[4:]]
    expect = [math.sqrt(-2 * math.log(((w[2 * i] >> 11) + 1) / 2**53)) * math.cos(2 * math.pi * (w[2 * i + 1] >> 11) / 2**53)
              for i in range(2)]
    assert zs.tolist() == pytest.approx(expect, rel=1e-15)


def test_rng_streams_differ_and_repeat():
    a = CounterRNG(1, 0).raw(4)
    assert np.array_equal(a, CounterRNG(1, 0).raw(4))
    assert not np.array_equal(a, CounterRNG(1, 1).raw(4))
    with pytest.raises(ValueError):
        CounterRNG(-1)


def test_rng_moments():
    z = CounterRNG(9).normal(1.0, 2.0, (200_000,))
    assert abs(z.mean() - 1.0) < 0.02 and abs(z.std() - 2.0) < 0.02
    u = CounterRNG(9, 1).uniform(0.0, 1.0, (200_000,))
    assert u.min() >= 0.0 and u.max() < 1.0 and abs(u.mean() - 0.5) < 0.005


def test_preset_config_counts():
    cfg = preset_config(4, equalities=True)
    assert (cfg.n, cfg.m, cfg.q) == (20, 44, 2)
    g = random_instance(cfg).game
    assert (g.n, g.constraints.m, g.constraints.q) == (20, 44, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 3), st.booleans(), st.integers(0, 2**63))
def test_generated_instances_are_monotone_and_feasible(N, k, q, box, seed):
    inst = random_instance(GenConfig(N=N, n_per_agent=k, q=min(q, N * k - 1), box_bounds=box, seed=seed))
    g = inst.game
    F = assemble_pseudogradient(g)
    assert check_strong_monotonicity(F).min_eig_Gs >= 0.9e-4
    assert validate_game(g).ok
    C = g.constraints
    assert np.all(C.A @ inst.x0 <= C.b)
    assert np.array_equal(C.E @ inst.x0, C.f)
    coupling = C.A[-inst.config.coupling_rows:] if inst.config.coupling_rows else C.A[:0]
    bc = C.b[-inst.config.coupling_rows:] if inst.config.coupling_rows else C.b[:0]
    assert np.all(bc - coupling @ inst.x0 >= 0.1 - 1e-12)


def test_same_seed_same_bytes():
    a = dumps(game_to_dict(random_instance(preset_config(3, seed=5, equalities=True)).game))
    b = dumps(game_to_dict(random_instance(preset_config(3, seed=5, equalities=True)).game))
    c = dumps(game_to_dict(random_instance(preset_config(3, seed=6, equalities=True)).game))
    assert a == b and a != c


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_bench_desk_scale():
    rep = benchmark_sweep([preset_config(2), preset_config(3)], 10, ("goldnash", "lemke_dual"))
    rows = _rows(rep.to_csv())
    assert tuple(rows[0]) == CSV_HEADER and len(rows) == 1 + 2 * 10 * 2
    head, lines = rep.summary_rows()
    assert len(lines) == 2
    cells = [dict(zip(head, l)) for l in lines]
    assert all(c["goldnash_success"] == "10/10" and c["lemke_dual_success"] == "10/10" for c in cells)
    assert all(float(c["max_disagreement"]) < 1e-8 for c in cells)
    seeds = [int(r[6]) for r in rows[1:] if r[0] == "2" and r[4] == "goldnash"]
    assert seeds == list(range(10))


def test_bench_zero_trials_is_header_only():
    rep = benchmark_sweep([preset_config(2)], 0)
    assert rep.to_csv() == ",".join(CSV_HEADER) + "\n"
    assert len(_rows(rep.summary_csv())) == 1


def test_bench_marks_primal_inapplicable_with_equalities():
    rep = benchmark_sweep([preset_config(5, equalities=True), preset_config(2)], 2)
    assert not any(r.solver == "lemke" and r.N == 5 for r in rep.rows)
    head, lines = rep.summary_rows()
    cells = dict(zip(head, lines[0]))
    assert cells["lemke_mean_ms"] == "--"
    assert dict(zip(head, lines[1]))["lemke_success"] == "2/2"
    only_eq = benchmark_sweep([preset_config(3, equalities=True)], 1)
    assert not any(h.startswith("lemke_mean") for h in only_eq.summary_rows()[0])


def test_bench_records_failures(monkeypatch):
    real = bench.run_solver

    def flaky(name, game, options=None):
        if name == "lemke_dual":
            raise RuntimeError("boom")
        return real(name, game, options)

    monkeypatch.setattr(bench, "run_solver", flaky)
    rep = benchmark_sweep([preset_config(2)], 2, ("goldnash", "lemke_dual"))
    status = {(r.solver, r.trial): r.status for r in rep.rows}
    assert status[("lemke_dual", 0)] == "error" and status[("goldnash", 1)] == "optimal"


def test_bench_untimed_output_is_deterministic():
    cfgs = [preset_config(2, seed=3), preset_config(3, seed=3, equalities=True)]
    a = benchmark_sweep(cfgs, 3).to_csv(timing=False)
    b = benchmark_sweep(cfgs, 3, jobs=2).to_csv(timing=False)
    assert a == b
    assert all(r[8] == "nan" for r in _rows(a)[1:])
