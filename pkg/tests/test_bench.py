import math

import numpy as np
import pytest

import invbench.bench as bench
from invbench.bench import (CSV_COLUMNS, RunResult, Scenario, build_core_grid,
                            grid_by_id, make_agent, pct_of_oracle,
                            read_results_csv, run_matrix, write_results_csv)


def test_grid_has_22_scenarios_with_regime_counts():
    grid = build_core_grid()
    assert len(grid) == 22
    groups = {}
    for s in grid:
        groups[s.regime_group] = groups.get(s.regime_group, 0) + 1
    assert groups == {"stationary": 4, "nonstationary_exogenous": 10,
                      "endogenous": 8}


def test_grid_ids_are_stable():
    ids1 = [s.id for s in build_core_grid()]
    ids2 = [s.id for s in build_core_grid()]
    assert ids1 == ids2
    assert len(set(ids1)) == 22
    # the exclusions never appear
    assert not any("stationary-endo" in i or "trace_volatile-endo" in i
                   for i in ids1)
    assert not any("trace_volatile" in i and "lost_sales" in i for i in ids1)


def test_invalid_scenarios_rejected():
    with pytest.raises(ValueError):
        Scenario(id="x", topology="base", demand_regime="stationary",
                 goodwill=True, fulfillment="backlog")
    with pytest.raises(ValueError):
        Scenario(id="x", topology="base", demand_regime="trace_volatile",
                 goodwill=False, fulfillment="lost_sales")


def test_trace_scenario_covers_horizon():
    s = grid_by_id()["base-trace_volatile-exo-backlog"]
    cfg = s.config()
    model = cfg.demand["ret1-market"]
    assert model.base_process == "deterministic_trace"
    assert len(model.trace) >= cfg.horizon
    assert float(np.mean(model.trace)) == pytest.approx(20.0, rel=1e-6)


def test_run_matrix_row_count_and_order():
    grid = build_core_grid()[:2]
    results = run_matrix(["newsvendor", "ss"], grid, seeds=[0, 1], timing=False)
    assert len(results) == 8
    keys = [(r.scenario, r.agent, r.seed) for r in results]
    assert keys == sorted(keys, key=lambda k: (
        [s.id for s in grid].index(k[0]), ["newsvendor", "ss"].index(k[1]), k[2]))


def test_seed_isolation_exogenous():
    grid = [grid_by_id()["base-stationary-exo-backlog"]]
    alone = run_matrix(["newsvendor"], grid, seeds=[0, 1], timing=False)
    roster = run_matrix(["ss", "newsvendor"], grid, seeds=[0, 1], timing=False)
    mine = [r for r in roster if r.agent == "newsvendor"]
    for a, b in zip(alone, mine):
        assert a.profit == b.profit
        assert a.kpi == b.kpi


def test_failed_episode_is_recorded_not_fatal(monkeypatch):
    grid = [grid_by_id()["base-stationary-exo-backlog"]]

    class Exploding:
        name = "boom"

        def begin(self, view, seed):
            pass

        def act(self, obs):
            raise RuntimeError("synthetic failure")

    real = bench.make_agent
    monkeypatch.setattr(bench, "make_agent",
                        lambda aid: Exploding() if aid == "boom" else real(aid))
    results = run_matrix(["boom", "newsvendor"], grid, seeds=[0], timing=False)
    assert len(results) == 2
    failed = [r for r in results if r.agent == "boom"]
    assert failed[0].failed
    assert math.isnan(failed[0].profit)
    ok = [r for r in results if r.agent == "newsvendor"]
    assert not ok[0].failed


def test_csv_round_trip(tmp_path):
    grid = build_core_grid()[:1]
    results = run_matrix(["newsvendor"], grid, seeds=[0, 1], timing=False)
    path = tmp_path / "r.csv"
    write_results_csv(results, path)
    rows = read_results_csv(path)
    assert len(rows) == 2
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[0]["profit"] == pytest.approx(results[0].profit)
    assert rows[1]["seed"] == 1


def test_matrix_determinism_with_timing_off(tmp_path):
    grid = build_core_grid()[:3]
    a_path, b_path = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results_csv(run_matrix(["newsvendor"], grid, [0, 1], timing=False), a_path)
    write_results_csv(run_matrix(["newsvendor"], grid, [0, 1], timing=False), b_path)
    assert a_path.read_bytes() == b_path.read_bytes()


def test_workers_match_serial_results():
    grid = build_core_grid()[:2]
    serial = run_matrix(["newsvendor"], grid, [0, 1], timing=False, workers=1)
    parallel = run_matrix(["newsvendor"], grid, [0, 1], timing=False, workers=2)
    assert [(r.agent, r.scenario, r.seed, r.profit) for r in serial] == \
        [(r.agent, r.scenario, r.seed, r.profit) for r in parallel]


def test_make_agent_roster():
    for aid in bench.AGENT_IDS:
        if aid == bench.ORACLE_ID:
            continue
        agent = make_agent(aid)
        assert agent.name == aid
    with pytest.raises(KeyError):
        make_agent("ppo-transformer")


# -- % of Oracle ---------------------------------------------------------------

def _synthetic_rows(per_agent: dict, scenarios, seeds=(0, 1)):
    rows = []
    for agent, factor in per_agent.items():
        for sc in scenarios:
            for seed in seeds:
                base = 1000.0 + 10.0 * seed
                rows.append({"agent": agent, "scenario": sc, "seed": seed,
                             "profit": base * factor})
    return rows


def test_oracle_vs_itself_is_100():
    scenarios = [s.id for s in build_core_grid()]
    rows = _synthetic_rows({"oracle": 1.0, "mirror": 1.0}, scenarios)
    report = pct_of_oracle(rows)
    for sc in scenarios:
        assert report.per_scenario["mirror", sc] == pytest.approx(100.0)
    mean, sd = report.aggregates["mirror", "all"]
    assert mean == pytest.approx(100.0)
    assert sd == pytest.approx(0.0)


def test_half_profit_agent_is_50_sd_0():
    scenarios = [s.id for s in build_core_grid()]
    rows = _synthetic_rows({"oracle": 1.0, "half": 0.5}, scenarios)
    report = pct_of_oracle(rows)
    for group in ("stationary", "nonstationary_exogenous", "endogenous", "all"):
        mean, sd = report.aggregates["half", group]
        assert mean == pytest.approx(50.0)
        assert sd == pytest.approx(0.0)


def test_regime_aggregation_matches_reference():
    """Spreadsheet-style reference on synthetic per-scenario percentages."""
    grid = build_core_grid()
    scenarios = [s.id for s in grid]
    rng = np.random.default_rng(2)
    factors = {sc: float(rng.uniform(0.3, 0.9)) for sc in scenarios}
    rows = []
    for sc in scenarios:
        for seed in (0, 1, 2):
            base = 500.0 + 20.0 * seed
            rows.append({"agent": "oracle", "scenario": sc, "seed": seed,
                         "profit": base})
            rows.append({"agent": "a", "scenario": sc, "seed": seed,
                         "profit": base * factors[sc]})
    report = pct_of_oracle(rows)
    by_group: dict = {}
    for s in grid:
        by_group.setdefault(s.regime_group, []).append(100.0 * factors[s.id])
    for group, vals in by_group.items():
        mean_ref = sum(vals) / len(vals)
        sd_ref = math.sqrt(sum((v - mean_ref) ** 2 for v in vals) / (len(vals) - 1))
        mean, sd = report.aggregates["a", group]
        assert mean == pytest.approx(mean_ref)
        assert sd == pytest.approx(sd_ref)
    assert len(by_group["stationary"]) == 4
    assert len(by_group["nonstationary_exogenous"]) == 10
    assert len(by_group["endogenous"]) == 8


def test_nonpositive_oracle_mean_yields_null():
    rows = _synthetic_rows({"a": 0.5}, ["base-stationary-exo-backlog"])
    rows += [{"agent": "oracle", "scenario": "base-stationary-exo-backlog",
              "seed": s, "profit": -5.0} for s in (0, 1)]
    report = pct_of_oracle(rows)
    assert report.per_scenario["a", "base-stationary-exo-backlog"] is None
    assert report.diagnostics
