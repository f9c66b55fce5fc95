"""Scenario grid construction, seeded evaluation runs, and result artifacts.

The core grid crosses topology, demand regime, endogenous goodwill, and
fulfillment mode, then drops the pairings that make no benchmarking sense:
goodwill exists to stress service-dependent non-stationarity, so it is not
paired with stationary or replayed-trace demand, and the external trace is
evaluated only under backlog so observed sales are not misread as an
uncensored lost-sales process. That leaves 22 scenarios: 4 stationary,
10 non-stationary exogenous, and 8 endogenous.

Episodes are a pure function of (scenario, seed): in exogenous rows every
agent faces the identical demand trace; goodwill rows re-simulate per agent
because demand is policy-dependent.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import defaults
from .agents import EnvView, make_heuristic
from .core import CoreEnv, EpisodeConfig, EpisodeRecord, KpiSet, kpis
from .demand import DemandModel, seasonal, shock, trend
from .optim import PlannerAgent, goodwill_oracle
from .topology import builtin

log = logging.getLogger(__name__)

TOPOLOGIES = ("base", "serial")
REGIMES = ("stationary", "trace_volatile", "trend_seasonal", "trend_seasonal_shock")
FULFILLMENTS = ("backlog", "lost_sales")

ORACLE_ID = "oracle"
HEURISTIC_IDS = ("newsvendor", "newsvendor-I", "ss", "ss-I",
                 "expsmooth", "expsmooth-I", "echelon", "echelon-I")
PLANNER_IDS = ("dlp", "dlp-I", "mssp", "mssp-I")
AGENT_IDS = HEURISTIC_IDS + PLANNER_IDS + (ORACLE_ID,)

CSV_COLUMNS = ("agent", "scenario", "seed", "profit", "service_level",
               "fill_rate", "unfulfilled", "avg_inventory", "bullwhip",
               "wall_time_s")


@dataclass(frozen=True)
class Scenario:
    id: str
    topology: str
    demand_regime: str
    goodwill: bool
    fulfillment: str

    def __post_init__(self):
        if self.goodwill and self.demand_regime in ("stationary", "trace_volatile"):
            raise ValueError("goodwill pairs only with synthetic non-stationarity")
        if self.demand_regime == "trace_volatile" and self.fulfillment == "lost_sales":
            raise ValueError("trace replay is backlog-only")

    @property
    def regime_group(self) -> str:
        if self.demand_regime == "stationary":
            return "stationary"
        return "endogenous" if self.goodwill else "nonstationary_exogenous"

    def demand_model(self) -> DemandModel:
        mean = defaults.MEAN_DEMAND
        if self.demand_regime == "stationary":
            return DemandModel(base_mean=mean)
        if self.demand_regime == "trace_volatile":
            return DemandModel(base_mean=mean, base_process="deterministic_trace",
                               trace=defaults.VOLATILE_TRACE)
        mods = [trend(defaults.TREND_SLOPE),
                seasonal(defaults.SEASONAL_AMPLITUDE, defaults.SEASONAL_PERIOD)]
        if self.demand_regime == "trend_seasonal_shock":
            mods.append(shock(defaults.SHOCK_TIME, defaults.SHOCK_MULTIPLIER,
                              defaults.SHOCK_DURATION))
        return DemandModel(base_mean=mean, modifiers=tuple(mods))

    def config(self, info_tier: str = "blind",
               horizon: int = defaults.HORIZON) -> EpisodeConfig:
        topo = builtin(self.topology)
        model = self.demand_model()
        return EpisodeConfig(
            topology=topo,
            demand={d.id: model for d in topo.retail},
            horizon=horizon,
            fulfillment=self.fulfillment,
            goodwill_enabled=self.goodwill,
            alpha=defaults.DISCOUNT,
            info_tier=info_tier,
        )


def _scenario_id(topology, regime, goodwill, fulfillment) -> str:
    dynamics = "endo" if goodwill else "exo"
    return f"{topology}-{regime}-{dynamics}-{fulfillment}"


def build_core_grid() -> list[Scenario]:
    """The canonical 22-scenario matrix, in stable id order."""
    grid: list[Scenario] = []
    for topology in TOPOLOGIES:
        for regime in REGIMES:
            for goodwill in (False, True):
                if goodwill and regime in ("stationary", "trace_volatile"):
                    continue
                for fulfillment in FULFILLMENTS:
                    if regime == "trace_volatile" and fulfillment == "lost_sales":
                        continue
                    grid.append(Scenario(
                        id=_scenario_id(topology, regime, goodwill, fulfillment),
                        topology=topology, demand_regime=regime,
                        goodwill=goodwill, fulfillment=fulfillment))
    return grid


def grid_by_id(grid: Sequence[Scenario] | None = None) -> dict[str, Scenario]:
    return {s.id: s for s in (grid if grid is not None else build_core_grid())}


# --------------------------------------------------------------------------
# Agents

def make_agent(agent_id: str):
    if agent_id in HEURISTIC_IDS:
        return make_heuristic(agent_id)
    if agent_id in PLANNER_IDS:
        kind = agent_id[:-2] if agent_id.endswith("-I") else agent_id
        tier = "informed" if agent_id.endswith("-I") else "blind"
        return PlannerAgent(kind, tier)
    raise KeyError(f"unknown agent id {agent_id!r}; oracle runs are requested "
                   f"with the reserved id {ORACLE_ID!r}")


def agent_tier(agent_id: str) -> str:
    return "informed" if agent_id.endswith("-I") else "blind"


# --------------------------------------------------------------------------
# Evaluation

@dataclass
class RunResult:
    agent: str
    scenario: str
    seed: int
    profit: float = math.nan
    kpi: KpiSet | None = None
    wall_time_s: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def run_scenario_episode(scenario: Scenario, agent_id: str, seed: int
                         ) -> EpisodeRecord:
    """One complete seeded episode of a causal agent."""
    cfg = scenario.config(info_tier=agent_tier(agent_id))
    agent = make_agent(agent_id)
    view = EnvView(topology=cfg.topology, horizon=cfg.horizon,
                   fulfillment=cfg.fulfillment, alpha=cfg.alpha,
                   goodwill_enabled=cfg.goodwill_enabled)
    agent.begin(view, seed)
    env = CoreEnv(cfg)
    obs = env.reset(seed)
    while not env.done:
        obs, _ = env.step(agent.act(obs))
    return env.record


def run_oracle_episode(scenario: Scenario, seed: int) -> EpisodeRecord:
    """The non-causal reference: a perfect-information plan in exogenous
    rows, the clairvoyant fixed-point benchmark under goodwill; either way
    the reported profit comes from replaying the plan in the simulator."""
    cfg = scenario.config(info_tier="informed")
    return goodwill_oracle(cfg, seed).record


def _run_one(task: tuple[Scenario, str, int, bool]) -> RunResult:
    scenario, agent_id, seed, timing = task
    t0 = time.perf_counter()
    row = RunResult(agent=agent_id, scenario=scenario.id, seed=seed)
    try:
        if agent_id == ORACLE_ID:
            record = run_oracle_episode(scenario, seed)
        else:
            record = run_scenario_episode(scenario, agent_id, seed)
        row.kpi = kpis(record)
        row.profit = record.profit
    except Exception as exc:  # noqa: BLE001 - failed row, not abort
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("episode failed: %s %s seed=%s: %s",
                    agent_id, scenario.id, seed, row.error)
    row.wall_time_s = (time.perf_counter() - t0) if timing else 0.0
    return row


def run_matrix(agents: Sequence[str], grid: Sequence[Scenario],
               seeds: Iterable[int], timing: bool = True,
               workers: int = 1) -> list[RunResult]:
    """Evaluate agents over the grid; one row per (agent, scenario, seed).

    A failing episode is recorded as a failed row rather than aborting the
    run. With ``timing=False`` wall times are reported as zero so repeated
    runs are byte-identical. Episodes are independent, so ``workers > 1``
    fans them out across processes; rows come back in deterministic order
    either way.
    """
    tasks = [(scenario, agent_id, seed, timing)
             for scenario in grid for agent_id in agents for seed in seeds]
    if workers <= 1:
        return [_run_one(t) for t in tasks]
    import multiprocessing as mp
    with mp.Pool(processes=workers) as pool:
        return pool.map(_run_one, tasks, chunksize=1)


# --------------------------------------------------------------------------
# CSV artifacts

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def result_rows(results: Sequence[RunResult]) -> list[list[str]]:
    rows = []
    for r in results:
        k = r.kpi
        rows.append([
            r.agent, r.scenario, str(r.seed), _cell(r.profit),
            _cell(k.service_level if k else None),
            _cell(k.fill_rate if k else None),
            _cell(k.total_unfulfilled if k else None),
            _cell(k.avg_inventory if k else None),
            _cell(k.bullwhip if k else None),
            _cell(r.wall_time_s),
        ])
    return rows


def write_results_csv(results: Sequence[RunResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(result_rows(results))


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected results schema: {reader.fieldnames}")
        out = []
        for raw in reader:
            row = dict(raw)
            row["seed"] = int(raw["seed"])
            for col in CSV_COLUMNS[3:]:
                row[col] = float(raw[col]) if raw[col] else math.nan
            out.append(row)
        return out


# --------------------------------------------------------------------------
# % of Oracle

REGIME_GROUPS = ("stationary", "nonstationary_exogenous", "endogenous")


@dataclass
class PctOracleReport:
    agents: list[str]
    scenarios: list[str]
    per_scenario: dict[tuple[str, str], float | None]  # (agent, scenario)
    aggregates: dict[tuple[str, str], tuple[float, float]]  # (agent, group) -> mean, sd
    diagnostics: list[str] = field(default_factory=list)


def pct_of_oracle(rows: Sequence[dict] | Sequence[RunResult]) -> PctOracleReport:
    """Scenario-wise % of Oracle profit: seed-mean agent profit over
    seed-mean Oracle profit, then regime aggregates (mean and sample SD
    across scenario percentages — heterogeneity summaries, not confidence
    intervals).
    """
    table: list[dict] = []
    for r in rows:
        if isinstance(r, RunResult):
            table.append({"agent": r.agent, "scenario": r.scenario,
                          "seed": r.seed, "profit": r.profit})
        else:
            table.append(r)
    scenarios = sorted({r["scenario"] for r in table})
    agents = sorted({r["agent"] for r in table} - {ORACLE_ID})
    by_id = grid_by_id()

    def seed_mean(agent: str, scenario: str) -> float:
        vals = [r["profit"] for r in table
                if r["agent"] == agent and r["scenario"] == scenario
                and not math.isnan(r["profit"])]
        return float(np.mean(vals)) if vals else math.nan

    report = PctOracleReport(agents=agents, scenarios=scenarios,
                             per_scenario={}, aggregates={})
    for scenario in scenarios:
        oracle_mean = seed_mean(ORACLE_ID, scenario)
        for agent in agents:
            mean = seed_mean(agent, scenario)
            if math.isnan(oracle_mean) or oracle_mean <= 0.0:
                report.per_scenario[agent, scenario] = None
                report.diagnostics.append(
                    f"{scenario}: oracle mean profit {oracle_mean!r} is not "
                    f"positive; % of Oracle undefined")
            elif math.isnan(mean):
                report.per_scenario[agent, scenario] = None
                report.diagnostics.append(f"{scenario}/{agent}: no successful runs")
            else:
                report.per_scenario[agent, scenario] = 100.0 * mean / oracle_mean

    for agent in agents:
        groups: dict[str, list[float]] = {g: [] for g in REGIME_GROUPS}
        all_vals: list[float] = []
        for scenario in scenarios:
            pct = report.per_scenario[agent, scenario]
            if pct is None:
                continue
            all_vals.append(pct)
            if scenario in by_id:
                groups[by_id[scenario].regime_group].append(pct)
        for group, vals in list(groups.items()) + [("all", all_vals)]:
            if vals:
                mean = float(np.mean(vals))
                sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
                report.aggregates[agent, group] = (mean, sd)
    return report


def pct_report_rows(report: PctOracleReport) -> tuple[list[str], list[list[str]]]:
    header = ["agent", "kind", "key", "pct_of_oracle", "sd"]
    rows = []
    for agent in report.agents:
        for scenario in report.scenarios:
            pct = report.per_scenario[agent, scenario]
            rows.append([agent, "scenario", scenario, _cell(pct), ""])
        for group in REGIME_GROUPS + ("all",):
            if (agent, group) in report.aggregates:
                mean, sd = report.aggregates[agent, group]
                rows.append([agent, "aggregate", group, _cell(mean), _cell(sd)])
    return header, rows
