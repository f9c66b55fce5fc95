"""LP-based planners sharing one scenario-tree plan model.

The plan model mirrors the simulator's period mechanics exactly — feasible
fills, lead-time pipelines, greedy-equivalent retail fulfillment, and the
additive reward — over a tree of demand outcomes. A single-path tree gives
the deterministic planners (the perfect-information Oracle and the rolling
expected-value LP); a branching tree gives the multi-stage stochastic
program, whose non-anticipativity is structural: one decision vector per
demand history.

Decisions for a period are attached to the history *before* that period's
demand, matching the simulator where orders are placed ahead of the draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import defaults
from .core import CoreEnv, EpisodeConfig, EpisodeRecord, SimState
from .demand import (GOODWILL_CAP, GOODWILL_DROP, GOODWILL_FLOOR,
                     GOODWILL_RECOVER, DemandModel, GoodwillState,
                     exogenous_mean)
from .lp import OPTIMAL, LinearProgram, LpError, LpSolution, solve_lp
from .rng import RngStream, substream
from .topology import Topology


class UnsupportedFeatureError(ValueError):
    """Raised for model features the LP cannot express (e.g. fixed order fees)."""


@dataclass
class TreeNode:
    """One demand-history node. The root (stage -1) carries the warm state;
    stage-s nodes carry that period's demand outcome and conditional
    probability. Decisions for period s live on the stage s-1 node."""

    index: int
    stage: int
    parent: int | None
    prob: float  # unconditional probability of reaching this node
    demand: dict[str, float] = field(default_factory=dict)
    children: list[int] = field(default_factory=list)


@dataclass
class ScenarioTree:
    horizon: int
    nodes: list[TreeNode]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def outcome_nodes(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.stage >= 0]

    def decision_nodes(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.stage < self.horizon - 1]

    def ancestor(self, node: TreeNode, back: int) -> TreeNode:
        cur = node
        for _ in range(back):
            cur = self.nodes[cur.parent]
        return cur

    def n_scenarios(self) -> int:
        return sum(1 for n in self.nodes if n.stage == self.horizon - 1)


def path_tree(series: Mapping[str, Sequence[float]], horizon: int) -> ScenarioTree:
    """Degenerate tree: one deterministic demand path."""
    nodes = [TreeNode(index=0, stage=-1, parent=None, prob=1.0)]
    parent = 0
    for s in range(horizon):
        node = TreeNode(index=len(nodes), stage=s, parent=parent, prob=1.0,
                        demand={eid: float(vals[s]) for eid, vals in series.items()})
        nodes[parent].children.append(node.index)
        nodes.append(node)
        parent = node.index
    return ScenarioTree(horizon=horizon, nodes=nodes)


def sampled_tree(mean_paths: Mapping[str, Sequence[float]], horizon: int,
                 branching: Sequence[int], rng: RngStream,
                 sampler: str = "poisson",
                 std_paths: Mapping[str, Sequence[float]] | None = None,
                 ) -> ScenarioTree:
    """SAA tree: the first ``len(branching)`` stages branch with sampled
    demand outcomes (equal weights); later stages continue flat along the
    conditional mean path. A branch factor of one takes the mean outright.
    """
    edge_ids = sorted(mean_paths)
    nodes = [TreeNode(index=0, stage=-1, parent=None, prob=1.0)]
    frontier = [0]
    for s in range(horizon):
        k = branching[s] if s < len(branching) else 1
        new_frontier: list[int] = []
        for parent_idx in frontier:
            parent = nodes[parent_idx]
            for _ in range(k):
                demand = {}
                for eid in edge_ids:
                    mean = float(mean_paths[eid][s])
                    if k == 1:
                        val = mean
                    elif sampler == "poisson":
                        val = float(rng.poisson(mean))
                    else:
                        std = (float(std_paths[eid][s]) if std_paths
                               else math.sqrt(max(mean, 0.0)))
                        val = max(0.0, rng.normal(mean, std))
                    demand[eid] = val
                node = TreeNode(index=len(nodes), stage=s, parent=parent_idx,
                                prob=parent.prob / k, demand=demand)
                parent.children.append(node.index)
                nodes.append(node)
                new_frontier.append(node.index)
        frontier = new_frontier
    return ScenarioTree(horizon=horizon, nodes=nodes)


# --------------------------------------------------------------------------
# Plan model

@dataclass(frozen=True)
class WarmStart:
    """Simulator state the plan starts from."""

    t: int
    on_hand: Mapping[str, float]
    pipeline: Mapping[str, Sequence[float]]
    u_prev: Mapping[str, float]

    @staticmethod
    def fresh(cfg: EpisodeConfig) -> "WarmStart":
        return WarmStart(
            t=0,
            on_hand=cfg.initial_stock(),
            pipeline={e.id: [0.0] * e.lead_time for e in cfg.topology.reorder},
            u_prev={d.id: 0.0 for d in cfg.topology.retail},
        )

    @staticmethod
    def from_state(state: SimState) -> "WarmStart":
        return WarmStart(t=state.t, on_hand=dict(state.on_hand),
                         pipeline={k: list(v) for k, v in state.pipeline.items()},
                         u_prev=dict(state.u_prev))

    @staticmethod
    def from_observation(obs, topo: Topology) -> "WarmStart":
        return WarmStart(
            t=obs.t,
            on_hand={n.id: obs.on_hand[n.id] for n in topo.managed_nodes},
            pipeline={e.id: list(obs.pipeline[e.id][: e.lead_time])
                      for e in topo.reorder},
            u_prev=dict(obs.u_prev),
        )


@dataclass
class PlanModel:
    cfg: EpisodeConfig
    warm: WarmStart
    tree: ScenarioTree
    lp: LinearProgram
    r_vars: dict[tuple[int, str], int]      # (decision node, edge) -> column
    x_vars: dict[tuple[int, str], int]      # (outcome node, managed node)
    s_vars: dict[tuple[int, str], int]
    u_vars: dict[tuple[int, str], int]
    value_offset: float = 0.0               # warm-pipeline holding, a constant


def build_plan(cfg, warm: WarmStart, tree: ScenarioTree) -> PlanModel:
    """Assemble the plan LP. ``cfg`` needs topology/fulfillment/alpha only,
    so both an EpisodeConfig and an agent's EnvView work."""
    topo = cfg.topology
    for e in topo.reorder:
        if e.fixed_order_cost > 0:
            raise UnsupportedFeatureError(
                f"edge {e.id}: fixed order fees need integrality; the LP "
                "planners only support K = 0")

    lp = LinearProgram(name=f"plan@t{warm.t}")
    reorder = topo.reorder
    retail = topo.retail
    managed = topo.managed_nodes

    r_vars: dict[tuple[int, str], int] = {}
    x_vars: dict[tuple[int, str], int] = {}
    s_vars: dict[tuple[int, str], int] = {}
    u_vars: dict[tuple[int, str], int] = {}

    for m in tree.decision_nodes():
        for e in reorder:
            r_vars[m.index, e.id] = lp.add_var(f"R[{m.index},{e.id}]")
    for n in tree.outcome_nodes():
        for node in managed:
            x_vars[n.index, node.id] = lp.add_var(f"X[{n.index},{node.id}]")
        for d in retail:
            s_vars[n.index, d.id] = lp.add_var(f"S[{n.index},{d.id}]")
            u_vars[n.index, d.id] = lp.add_var(f"U[{n.index},{d.id}]")

    def x_ref(node: TreeNode, j: str) -> tuple[int | None, float]:
        """Column (or None) and constant for stock entering the node's period."""
        if node.stage == -1:
            return None, float(warm.on_hand.get(j, 0.0))
        return x_vars[node.index, j], 0.0

    def arrival(n: TreeNode, e) -> tuple[int | None, float]:
        """Fill arriving during outcome node n's period on edge e: the order
        decided lead_time periods earlier (at the stage n.stage - L - 1
        history node), or a warm-pipeline entry if that predates the plan."""
        lag = e.lead_time
        if n.stage >= lag:
            dec = tree.ancestor(n, lag + 1)
            return r_vars[dec.index, e.id], 0.0
        sched = warm.pipeline.get(e.id, [])
        return None, (float(sched[n.stage]) if n.stage < len(sched) else 0.0)

    # feasibility caps per decision node
    for m in tree.decision_nodes():
        by_source: dict[str, list] = {}
        for e in reorder:
            by_source.setdefault(e.from_node, []).append(e)
        for src_id, edges in by_source.items():
            src = topo.node(src_id)
            if src.kind == "raw_source":
                continue
            xcol, xconst = x_ref(m, src_id)
            coeffs = {r_vars[m.index, e.id]: 1.0 for e in edges}
            if src.kind == "factory":
                cap = src.capacity()
                if math.isfinite(cap):
                    lp.add_constraint(f"cap[{m.index},{src_id}]", dict(coeffs),
                                      "<=", cap)
                stock = dict(coeffs)
                if xcol is not None:
                    stock[xcol] = -src.yield_factor
                lp.add_constraint(f"input[{m.index},{src_id}]", stock, "<=",
                                  src.yield_factor * xconst if xcol is None else 0.0)
            else:
                stock = dict(coeffs)
                if xcol is not None:
                    stock[xcol] = -1.0
                lp.add_constraint(f"stock[{m.index},{src_id}]", stock, "<=",
                                  xconst if xcol is None else 0.0)

    alpha = cfg.alpha
    for n in tree.outcome_nodes():
        parent = tree.nodes[n.parent]
        disc = n.prob * (alpha ** (warm.t + n.stage))

        # material balance: X[n,j] - X[parent,j] - arrivals + outflow/v = 0
        for node in managed:
            j = node.id
            coeffs = {x_vars[n.index, j]: 1.0}
            rhs = 0.0
            pcol, pconst = x_ref(parent, j)
            if pcol is not None:
                coeffs[pcol] = coeffs.get(pcol, 0.0) - 1.0
            else:
                rhs += pconst
            for e in topo.inbound_reorder(j):
                acol, aconst = arrival(n, e)
                if acol is not None:
                    coeffs[acol] = coeffs.get(acol, 0.0) - 1.0
                else:
                    rhs += aconst
            inv_v = 1.0 / node.yield_factor
            for e in topo.outbound_reorder(j):
                col = r_vars[parent.index, e.id]
                coeffs[col] = coeffs.get(col, 0.0) + inv_v
            for d in topo.retail_out(j):
                coeffs[s_vars[n.index, d.id]] = (
                    coeffs.get(s_vars[n.index, d.id], 0.0) + inv_v)
            lp.add_constraint(f"bal[{n.index},{j}]", coeffs, "==", rhs)

        # retail fulfillment: S + U = demand (+ carried backlog)
        for d in retail:
            coeffs = {s_vars[n.index, d.id]: 1.0, u_vars[n.index, d.id]: 1.0}
            rhs = n.demand[d.id]
            if cfg.fulfillment == "backlog":
                if parent.stage == -1:
                    rhs += float(warm.u_prev.get(d.id, 0.0))
                else:
                    coeffs[u_vars[parent.index, d.id]] = -1.0
            lp.add_constraint(f"fulfil[{n.index},{d.id}]", coeffs, "==", rhs)

        # objective: discounted expected period profit (pipeline holding is
        # folded onto the fills below rather than carried as variables)
        for node in managed:
            j = node.id
            for e in topo.outbound_reorder(j):
                lp.add_obj(r_vars[parent.index, e.id], disc * e.unit_price)
            for d in topo.retail_out(j):
                lp.add_obj(s_vars[n.index, d.id], disc * d.unit_price)
            for e in topo.inbound_reorder(j):
                lp.add_obj(r_vars[parent.index, e.id], -disc * e.unit_price)
            lp.add_obj(x_vars[n.index, j], -disc * node.holding_cost)
            oc = node.operating_cost / node.yield_factor
            for e in topo.outbound_reorder(j):
                lp.add_obj(r_vars[parent.index, e.id], -disc * oc)
            for d in topo.retail_out(j):
                lp.add_obj(s_vars[n.index, d.id], -disc * oc)
                lp.add_obj(u_vars[n.index, d.id], -disc * d.shortage_penalty)

    # Pipeline holding: a fill decided at node m (period m.stage + 1) on edge
    # e sits in transit for the lead_time post-period snapshots that follow,
    # along every continuation of m (total probability = m.prob).
    h = tree.horizon
    for m in tree.decision_nodes():
        tau = m.stage + 1
        for e in reorder:
            g = e.pipeline_holding
            if g <= 0.0 or e.lead_time == 0:
                continue
            weight = sum(alpha ** (warm.t + s)
                         for s in range(tau, min(tau + e.lead_time, h)))
            if weight:
                lp.add_obj(r_vars[m.index, e.id], -m.prob * g * weight)

    # warm-start pipeline entries keep accruing holding until they land
    offset = 0.0
    for e in reorder:
        g = e.pipeline_holding
        if g <= 0.0:
            continue
        for k, qty in enumerate(warm.pipeline.get(e.id, [])):
            if qty:
                offset -= g * qty * sum(alpha ** (warm.t + s)
                                        for s in range(0, min(k, h)))
    return PlanModel(cfg=cfg, warm=warm, tree=tree, lp=lp, r_vars=r_vars,
                     x_vars=x_vars, s_vars=s_vars, u_vars=u_vars,
                     value_offset=offset)


@dataclass
class PlanResult:
    value: float
    first_action: np.ndarray
    actions: list[np.ndarray] | None
    model: PlanModel
    solution: LpSolution
    flag: str = "optimal"


def solve_plan(model: PlanModel) -> PlanResult:
    sol = solve_lp(model.lp)
    if sol.status != OPTIMAL:
        raise LpError(f"plan LP is {sol.status}")
    topo = model.cfg.topology
    tree = model.tree
    root = tree.root
    first = np.array([sol.x[model.r_vars[root.index, e.id]] for e in topo.reorder])

    actions = None
    if tree.n_scenarios() == 1:
        actions = []
        node = root
        for _ in range(tree.horizon):
            actions.append(np.array(
                [sol.x[model.r_vars[node.index, e.id]] for e in topo.reorder]))
            node = tree.nodes[node.children[0]]
    return PlanResult(value=sol.value + model.value_offset, first_action=first,
                      actions=actions, model=model, solution=sol)


def replay_plan(cfg: EpisodeConfig, warm: WarmStart,
                series: Mapping[str, Sequence[float]],
                actions: Sequence[np.ndarray]) -> EpisodeRecord:
    """Push a deterministic plan through the simulator from the warm state
    against the same demand series the plan was built on. The recorded
    profit must reproduce the plan objective; this is the central audit of
    model/simulator agreement.
    """
    topo = cfg.topology
    h = len(actions)
    demand = {}
    for d in topo.retail:
        padded = [0.0] * warm.t + [float(v) for v in series[d.id][:h]]
        demand[d.id] = DemandModel(base_mean=cfg.demand[d.id].base_mean,
                                   base_process="deterministic_trace",
                                   trace=tuple(padded))
    replay_cfg = EpisodeConfig(
        topology=topo, demand=demand, horizon=warm.t + h,
        fulfillment=cfg.fulfillment, goodwill_enabled=False, alpha=cfg.alpha,
        initial_inventory=cfg.initial_inventory)
    env = CoreEnv(replay_cfg)
    state = SimState(
        t=warm.t,
        on_hand=dict(warm.on_hand),
        pipeline={e.id: list(warm.pipeline.get(e.id, [0.0] * e.lead_time))
                  for e in topo.reorder},
        u_prev=dict(warm.u_prev),
        d_prev={d.id: 0.0 for d in topo.retail},
        goodwill=GoodwillState(s=1.0, enabled=False),
        streams={d.id: substream(0, "replay", d.id) for d in topo.retail},
    )
    env.restore(state)
    for a in actions:
        env.step(a)
    return env.record


# --------------------------------------------------------------------------
# Demand paths

def realize_demand(cfg: EpisodeConfig, seed: int) -> dict[str, list[float]]:
    """The exact demand series the simulator will draw for this seed.

    Only valid with goodwill disabled: endogenous feedback makes realized
    demand policy-dependent.
    """
    if cfg.goodwill_enabled:
        raise ValueError("realized demand is policy-dependent under goodwill")
    out: dict[str, list[float]] = {}
    for d in cfg.topology.retail:
        model = cfg.demand[d.id]
        stream = substream(seed, "demand", d.id)
        vals = []
        for t in range(cfg.horizon):
            lam = exogenous_mean(model, t)
            if model.base_process == "deterministic_trace":
                stream.skip()
                vals.append(float(lam))
            else:
                vals.append(float(stream.poisson(lam)))
        out[d.id] = vals
    return out


def informed_mean_path(cfg: EpisodeConfig, t0: int, horizon: int,
                       sentiment: float = 1.0) -> dict[str, list[float]]:
    """Declared exogenous mean path from t0, scaled by current sentiment."""
    scale = sentiment if cfg.goodwill_enabled else 1.0
    return {
        d.id: [scale * exogenous_mean(cfg.demand[d.id], t0 + h)
               for h in range(horizon)]
        for d in cfg.topology.retail
    }


# --------------------------------------------------------------------------
# Planners

def oracle_plan(cfg: EpisodeConfig, realized: Mapping[str, Sequence[float]]
                ) -> PlanResult:
    """Perfect-information plan against the full realized demand series."""
    tree = path_tree(realized, cfg.horizon)
    return solve_plan(build_plan(cfg, WarmStart.fresh(cfg), tree))


def dlp_plan(cfg, warm: WarmStart,
             forecast: Mapping[str, Sequence[float]],
             h_cap: int | None = None) -> PlanResult:
    remaining = cfg.horizon - warm.t
    h = remaining if h_cap is None else min(h_cap, remaining)
    if h < 1:
        raise ValueError("nothing left to plan")
    series = {eid: list(vals[:h]) for eid, vals in forecast.items()}
    tree = path_tree(series, h)
    return solve_plan(build_plan(cfg, warm, tree))


def dlp_step(cfg, warm: WarmStart,
             forecast: Mapping[str, Sequence[float]],
             h_cap: int | None = None) -> np.ndarray:
    return dlp_plan(cfg, warm, forecast, h_cap).first_action


def mssp_step(cfg, warm: WarmStart,
              forecast: Mapping[str, Sequence[float]],
              rng: RngStream,
              h_cap: int | None = defaults.MSSP_HORIZON_CAP,
              branching: Sequence[int] = defaults.MSSP_BRANCHING,
              sampler: str = "poisson",
              std_paths: Mapping[str, Sequence[float]] | None = None,
              ) -> np.ndarray:
    remaining = cfg.horizon - warm.t
    h = remaining if h_cap is None else min(h_cap, remaining)
    if h < 1:
        raise ValueError("nothing left to plan")
    means = {eid: list(vals[:h]) for eid, vals in forecast.items()}
    stds = ({eid: list(vals[:h]) for eid, vals in std_paths.items()}
            if std_paths else None)
    tree = sampled_tree(means, h, branching, rng, sampler=sampler, std_paths=stds)
    return solve_plan(build_plan(cfg, warm, tree)).first_action


# --------------------------------------------------------------------------
# Clairvoyant goodwill benchmark

@dataclass
class GoodwillOracleResult:
    actions: list[np.ndarray]
    profit: float
    record: EpisodeRecord
    converged: bool
    iterations: int
    branch: str
    stockout_periods: int = 0


def _replay(cfg: EpisodeConfig, seed: int, actions: Sequence[np.ndarray]
            ) -> EpisodeRecord:
    env = CoreEnv(cfg)
    env.reset(seed)
    for a in actions:
        if env.done:
            break
        env.step(a)
    while not env.done:
        env.step(np.zeros(len(cfg.topology.reorder)))
    return env.record


def _sentiment_envelope(cfg: EpisodeConfig, optimistic: bool) -> list[float]:
    s, path = 1.0, []
    for _ in range(cfg.horizon):
        path.append(s)
        s = (min(GOODWILL_CAP, GOODWILL_RECOVER * s) if optimistic
             else max(GOODWILL_FLOOR, GOODWILL_DROP * s))
    return path


def goodwill_oracle(cfg: EpisodeConfig, seed: int,
                    max_iters: int = defaults.GOODWILL_ORACLE_ITERS
                    ) -> GoodwillOracleResult:
    """Clairvoyant benchmark under endogenous demand: alternate between
    planning against a demand trace and simulating the plan to observe the
    trace it actually induces, from both an optimistic (no-stockout) and a
    pessimistic (all-stockout) starting envelope. Returns the better
    realized plan; this is a benchmark, not a certified optimum.
    """
    if not cfg.goodwill_enabled:
        realized = realize_demand(cfg, seed)
        plan = oracle_plan(cfg, realized)
        record = _replay(cfg, seed, plan.actions)
        return GoodwillOracleResult(actions=plan.actions, profit=record.profit,
                                    record=record, converged=True, iterations=0,
                                    branch="exogenous")

    best: GoodwillOracleResult | None = None
    plan_cfg = EpisodeConfig(
        topology=cfg.topology, demand=cfg.demand, horizon=cfg.horizon,
        fulfillment=cfg.fulfillment, goodwill_enabled=False, alpha=cfg.alpha,
        info_tier=cfg.info_tier, initial_inventory=cfg.initial_inventory)

    for branch in ("optimistic", "pessimistic"):
        env_path = _sentiment_envelope(cfg, branch == "optimistic")
        trace = {
            d.id: [env_path[t] * exogenous_mean(cfg.demand[d.id], t)
                   for t in range(cfg.horizon)]
            for d in cfg.topology.retail
        }
        prev_trace = None
        converged = False
        iterations = 0
        branch_best: tuple[float, int, GoodwillOracleResult] | None = None
        for it in range(max_iters):
            iterations = it + 1
            plan = solve_plan(build_plan(plan_cfg, WarmStart.fresh(plan_cfg),
                                         path_tree(trace, cfg.horizon)))
            record = _replay(cfg, seed, plan.actions)
            induced = {d.id: [p.demand[d.id] for p in record.periods]
                       for d in cfg.topology.retail}
            stockouts = sum(1 for p in record.periods
                            if sum(p.unfulfilled.values()) > 0)
            cand = GoodwillOracleResult(
                actions=plan.actions, profit=record.profit, record=record,
                converged=False, iterations=iterations, branch=branch,
                stockout_periods=stockouts)
            key = (record.profit, -stockouts)
            if branch_best is None or key > branch_best[:2]:
                branch_best = (record.profit, -stockouts, cand)
            if induced == prev_trace or induced == trace:
                converged = True
                break
            prev_trace = trace
            trace = induced
        result = branch_best[2]
        result.converged = converged
        if best is None or (result.profit, -result.stockout_periods) > (
                best.profit, -best.stockout_periods):
            best = result
    return best


# --------------------------------------------------------------------------
# Rolling-horizon planner agents under the shared policy interface

class PlannerAgent:
    """Wraps the rolling LP planners as causal agents. Blind variants
    forecast a flat history-mean path; informed variants rebuild the
    declared demand model from the observation context and forecast its
    mean path, scaled by current sentiment when goodwill is active.
    """

    def __init__(self, kind: str, tier: str = "blind"):
        if kind not in ("dlp", "mssp"):
            raise ValueError(f"unknown planner {kind!r}")
        if tier not in ("blind", "informed"):
            raise ValueError(f"unknown tier {tier!r}")
        self.kind = kind
        self.tier = tier
        self.view = None
        self.seed = 0
        self.history: dict[str, list[float]] = {}

    @property
    def name(self) -> str:
        return self.kind + ("-I" if self.tier == "informed" else "")

    def begin(self, view, seed: int) -> None:
        self.view = view
        self.seed = seed
        self.history = {d.id: [] for d in view.topology.retail}

    def _forecast(self, obs, horizon: int):
        from .agents import estimate_demand  # late import avoids a cycle
        means: dict[str, list[float]] = {}
        stds: dict[str, list[float]] = {}
        for d in self.view.topology.retail:
            if self.tier == "informed":
                if obs.context is None:
                    raise ValueError("informed planner needs demand context")
                model = DemandModel.from_dict(obs.context[d.id]["model"])
                scale = obs.sentiment if self.view.goodwill_enabled else 1.0
                path = [scale * exogenous_mean(model, obs.t + h)
                        for h in range(horizon)]
                means[d.id] = path
                stds[d.id] = [math.sqrt(max(v, 0.0)) for v in path]
            else:
                est = estimate_demand(self.history[d.id], "blind",
                                      prior_mean=self.view.prior_mean)
                means[d.id] = [est.mean] * horizon
                stds[d.id] = [est.std] * horizon
        return means, stds

    def act(self, obs) -> np.ndarray:
        if obs.t >= 1:
            for eid, val in obs.d_prev.items():
                self.history[eid].append(val)
        remaining = self.view.horizon - obs.t
        warm = WarmStart.from_observation(obs, self.view.topology)
        means, stds = self._forecast(obs, remaining)
        if self.kind == "dlp":
            action = dlp_step(self.view, warm, means,
                              h_cap=defaults.DLP_HORIZON_CAP)
        else:
            rng = substream(self.seed, "mssp", self.tier, obs.t)
            sampler = "poisson" if self.tier == "informed" else "normal"
            action = mssp_step(self.view, warm, means, rng,
                               sampler=sampler, std_paths=stds)
        return np.maximum(action, 0.0)
