"""The shared transition kernel: feasibility-capped order filling, pipeline
and material-balance updates, retail fulfillment, goodwill feedback, reward
accounting, and KPI extraction.

Every controller — heuristic, optimizer, or external process — steps the
same kernel. Within one period the event sequence is fixed:

1. raw requests are clamped and allocated into feasible filled orders,
   decrementing upstream stock;
2. pipeline arrivals land on-hand, the schedule shifts, and the new fills
   are enqueued at their lead times;
3. retail demand is realized from the sentiment-scaled mean and filled
   greedily from post-arrival stock (backlog mode carries unmet demand
   into the next period's effective demand);
4. sentiment updates from this period's aggregate shortfall;
5. the period reward is computed on post-step stocks.

Filled orders, never raw requests, feed the pipeline: an order the upstream
node cannot physically ship is not in-transit inventory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import topology as topo_mod
from .demand import (DemandModel, GoodwillState, draw_demand, effective_mean,
                     exogenous_mean, goodwill_update)
from .rng import RngStream, substream
from .topology import EdgeSpec, Topology

FULFILLMENT_MODES = ("backlog", "lost_sales")
INFO_TIERS = ("blind", "informed")
FEATURE_DIM = 2  # [t / T, sentiment]

_EPS = 1e-12


class EpisodeError(RuntimeError):
    """Raised on stepping a finished episode or malformed actions."""


@dataclass(frozen=True)
class EpisodeConfig:
    topology: Topology
    demand: Mapping[str, DemandModel]
    horizon: int = 30
    fulfillment: str = "backlog"
    goodwill_enabled: bool = False
    alpha: float = 1.0
    info_tier: str = "blind"
    initial_inventory: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must be in (0, 1]")
        if self.fulfillment not in FULFILLMENT_MODES:
            raise ValueError(f"unknown fulfillment mode {self.fulfillment!r}")
        if self.info_tier not in INFO_TIERS:
            raise ValueError(f"unknown info tier {self.info_tier!r}")
        missing = {e.id for e in self.topology.retail} - set(self.demand)
        if missing:
            raise ValueError(f"no demand model for retail edges {sorted(missing)}")
        for eid, model in self.demand.items():
            if model.trace is not None and len(model.trace) < self.horizon:
                raise ValueError(
                    f"trace on {eid} shorter than horizon "
                    f"({len(model.trace)} < {self.horizon})")

    def initial_stock(self) -> dict[str, float]:
        if self.initial_inventory is not None:
            base = dict(self.initial_inventory)
        else:
            base = dict(topo_mod.INITIAL_INVENTORY.get(self.topology.name, {}))
        return {n.id: float(base.get(n.id, 0.0)) for n in self.topology.managed_nodes}


@dataclass
class SimState:
    t: int
    on_hand: dict[str, float]
    pipeline: dict[str, list[float]]
    u_prev: dict[str, float]
    d_prev: dict[str, float]
    goodwill: GoodwillState
    streams: dict[str, RngStream]

    def pipeline_total(self, edge_id: str) -> float:
        return sum(self.pipeline[edge_id])

    def copy(self) -> "SimState":
        return SimState(
            t=self.t,
            on_hand=dict(self.on_hand),
            pipeline={k: list(v) for k, v in self.pipeline.items()},
            u_prev=dict(self.u_prev),
            d_prev=dict(self.d_prev),
            goodwill=self.goodwill,
            streams={k: v.clone() for k, v in self.streams.items()},
        )


@dataclass(frozen=True)
class Observation:
    """Flat causal observation plus named views of its segments.

    Layout: ``[D_prev | U_prev | X | pipeline | features]`` with retail edges
    in retail order, nodes in declaration order, reorder edges in action
    order padded to the longest lead time, and features ``[t/T, sentiment]``.
    The informed tier additionally carries the current exogenous means and
    declared demand-model parameters in ``context``; the blind tier never
    sees them.
    """

    vector: np.ndarray
    t: int
    d_prev: dict[str, float]
    u_prev: dict[str, float]
    on_hand: dict[str, float]
    pipeline: dict[str, tuple[float, ...]]
    features: tuple[float, float]
    context: dict[str, dict] | None = None

    @property
    def sentiment(self) -> float:
        return self.features[1]


def observation_layout(topo: Topology) -> list[dict]:
    """Segment names, offsets, and lengths of the flat vector."""
    n_d = len(topo.retail)
    n_v = len(topo.nodes)
    n_pipe = len(topo.reorder) * topo.max_lead_time
    segs = []
    off = 0
    for name, length in (("d_prev", n_d), ("u_prev", n_d), ("on_hand", n_v),
                         ("pipeline", n_pipe), ("features", FEATURE_DIM)):
        segs.append({"name": name, "offset": off, "length": length})
        off += length
    return segs


@dataclass(frozen=True)
class StepResult:
    reward: float
    reward_terms: dict[str, float]
    shipments: dict[str, float]
    filled: dict[str, float]
    demand: dict[str, float]
    unfulfilled: dict[str, float]
    done: bool


@dataclass
class PeriodRecord:
    t: int
    actions: dict[str, float]
    filled: dict[str, float]
    shipments: dict[str, float]
    demand: dict[str, float]
    effective_demand: dict[str, float]
    unfulfilled: dict[str, float]
    reward_terms: dict[str, float]
    reward: float
    sentiment: float
    on_hand: dict[str, float]
    pipeline_totals: dict[str, float]


@dataclass
class EpisodeRecord:
    config: EpisodeConfig
    seed: int
    initial_on_hand: dict[str, float]
    periods: list[PeriodRecord] = field(default_factory=list)

    @property
    def profit(self) -> float:
        return sum(p.reward for p in self.periods)

    def ledger_rows(self) -> tuple[list[str], list[list]]:
        """Per-period audit ledger as (header, rows)."""
        topo = self.config.topology
        header = ["t"]
        for e in topo.reorder:
            header += [f"a[{e.id}]", f"R[{e.id}]"]
        for d in topo.retail:
            header += [f"D[{d.id}]", f"U[{d.id}]", f"S[{d.id}]"]
        header += ["SR", "PC", "HC", "PHC", "OC", "SP", "FK", "reward", "sentiment"]
        rows = []
        for p in self.periods:
            row: list = [p.t]
            for e in topo.reorder:
                row += [p.actions[e.id], p.filled[e.id]]
            for d in topo.retail:
                row += [p.demand[d.id], p.unfulfilled[d.id], p.shipments[d.id]]
            row += [p.reward_terms[k] for k in ("SR", "PC", "HC", "PHC", "OC", "SP", "FK")]
            row += [p.reward, p.sentiment]
            rows.append(row)
        return header, rows

    def write_ledger(self, path) -> None:
        header, rows = self.ledger_rows()
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --------------------------------------------------------------------------
# Feasibility and allocation

def feasible_bound(topo: Topology, state: SimState, edge: EdgeSpec) -> float:
    """Per-link supply cap before same-period contention is resolved."""
    source = topo.node(edge.from_node)
    if source.kind == "raw_source":
        return math.inf
    if source.kind == "factory":
        return min(source.capacity(), source.yield_factor * state.on_hand[source.id])
    return state.on_hand[source.id]


def fill_orders(topo: Topology, state: SimState, actions: Mapping[str, float]
                ) -> dict[str, float]:
    """Clamp requests to per-link bounds, then resolve contention on shared
    upstream stock by proportional rationing. Decrements upstream on-hand
    (factories consume input at 1/yield per shipped unit).
    """
    clamped = {}
    for e in topo.reorder:
        req = max(float(actions.get(e.id, 0.0)), 0.0)
        clamped[e.id] = min(req, feasible_bound(topo, state, e))

    filled = dict(clamped)
    by_source: dict[str, list[EdgeSpec]] = {}
    for e in topo.reorder:
        by_source.setdefault(e.from_node, []).append(e)

    for source_id, edges in by_source.items():
        source = topo.node(source_id)
        if source.kind == "raw_source":
            continue
        if source.kind == "factory":
            avail = min(source.capacity(), source.yield_factor * state.on_hand[source_id])
        else:
            avail = state.on_hand[source_id]
        total = sum(filled[e.id] for e in edges)
        if total > avail + _EPS:
            scale = avail / total if total > 0 else 0.0
            for e in edges:
                filled[e.id] *= scale
            total = avail
        if source.kind == "factory":
            state.on_hand[source_id] -= total / source.yield_factor
        else:
            state.on_hand[source_id] -= total
        if -1e-9 < state.on_hand[source_id] < 0.0:
            state.on_hand[source_id] = 0.0
    return filled


# --------------------------------------------------------------------------
# The environment

class CoreEnv:
    def __init__(self, cfg: EpisodeConfig):
        self.cfg = cfg
        self.topo = cfg.topology
        self.state: SimState | None = None
        self.record: EpisodeRecord | None = None
        self._layout = observation_layout(self.topo)

    # -- lifecycle ----------------------------------------------------------

    def reset(self, seed: int) -> Observation:
        topo = self.topo
        streams = {d.id: substream(seed, "demand", d.id) for d in topo.retail}
        self.state = SimState(
            t=0,
            on_hand=self.cfg.initial_stock(),
            pipeline={e.id: [0.0] * e.lead_time for e in topo.reorder},
            u_prev={d.id: 0.0 for d in topo.retail},
            d_prev={d.id: 0.0 for d in topo.retail},
            goodwill=GoodwillState(s=1.0, enabled=self.cfg.goodwill_enabled),
            streams=streams,
        )
        self.record = EpisodeRecord(
            config=self.cfg, seed=seed, initial_on_hand=dict(self.state.on_hand),
        )
        return self.observe()

    def restore(self, state: SimState) -> Observation:
        """Continue from a mid-episode state (used by rolling-horizon audits)."""
        self.state = state.copy()
        self.record = EpisodeRecord(
            config=self.cfg, seed=-1, initial_on_hand=dict(self.state.on_hand),
        )
        return self.observe()

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.t >= self.cfg.horizon

    # -- observation --------------------------------------------------------

    def observe(self) -> Observation:
        st = self.state
        topo = self.topo
        l_max = topo.max_lead_time
        d_prev = {d.id: st.d_prev[d.id] for d in topo.retail}
        u_prev = {d.id: st.u_prev[d.id] for d in topo.retail}
        on_hand = {n.id: st.on_hand.get(n.id, 0.0) for n in topo.nodes}
        pipe = {}
        for e in topo.reorder:
            padded = list(st.pipeline[e.id]) + [0.0] * (l_max - e.lead_time)
            pipe[e.id] = tuple(padded)
        feats = (st.t / self.cfg.horizon, st.goodwill.s)
        vec = np.concatenate([
            np.array([d_prev[d.id] for d in topo.retail], dtype=float),
            np.array([u_prev[d.id] for d in topo.retail], dtype=float),
            np.array([on_hand[n.id] for n in topo.nodes], dtype=float),
            np.concatenate([np.asarray(pipe[e.id]) for e in topo.reorder])
            if topo.reorder else np.zeros(0),
            np.array(feats, dtype=float),
        ])
        context = None
        if self.cfg.info_tier == "informed":
            t_ctx = min(st.t, self.cfg.horizon - 1)
            context = {
                d.id: {
                    "mean": exogenous_mean(self.cfg.demand[d.id], t_ctx),
                    "model": self.cfg.demand[d.id].to_dict(),
                }
                for d in topo.retail
            }
        return Observation(vector=vec, t=st.t, d_prev=d_prev, u_prev=u_prev,
                           on_hand=on_hand, pipeline=pipe, features=feats,
                           context=context)

    def layout(self) -> list[dict]:
        return [dict(seg) for seg in self._layout]

    # -- transition ---------------------------------------------------------

    def step(self, action: Sequence[float] | Mapping[str, float]
             ) -> tuple[Observation, StepResult]:
        if self.state is None:
            raise EpisodeError("reset before stepping")
        if self.done:
            raise EpisodeError("episode is done")
        st = self.state
        topo = self.topo
        cfg = self.cfg
        t = st.t

        actions = self._as_action_map(action)

        # 1. feasibility allocation
        filled = fill_orders(topo, st, actions)

        # 2. arrivals, pipeline shift, enqueue new fills
        for e in topo.reorder:
            p = st.pipeline[e.id]
            arrival = 0.0
            if e.lead_time > 0:
                arrival = p.pop(0)
                p.append(0.0)
                p[e.lead_time - 1] += filled[e.id]
            else:
                arrival = filled[e.id]
            if arrival:
                st.on_hand[e.to_node] += arrival

        # 3. demand realization and retail fulfillment
        demand: dict[str, float] = {}
        eff_demand: dict[str, float] = {}
        for d in topo.retail:
            lam_bar = exogenous_mean(cfg.demand[d.id], t)
            lam_eff = effective_mean(st.goodwill, lam_bar)
            dd = draw_demand(cfg.demand[d.id], lam_eff, st.streams[d.id])
            demand[d.id] = dd
            eff_demand[d.id] = dd + (st.u_prev[d.id] if cfg.fulfillment == "backlog" else 0.0)

        shipments: dict[str, float] = {}
        unfulfilled: dict[str, float] = {}
        by_retailer: dict[str, list[EdgeSpec]] = {}
        for d in topo.retail:
            by_retailer.setdefault(d.from_node, []).append(d)
        for retailer_id, edges in by_retailer.items():
            want = {d.id: eff_demand[d.id] for d in edges}
            avail = st.on_hand[retailer_id]
            total = sum(want.values())
            scale = 1.0 if total <= avail + _EPS else (avail / total if total > 0 else 0.0)
            shipped_total = 0.0
            for d in edges:
                s_d = want[d.id] * scale
                shipments[d.id] = s_d
                unfulfilled[d.id] = want[d.id] - s_d
                shipped_total += s_d
            st.on_hand[retailer_id] -= shipped_total
            if -1e-9 < st.on_hand[retailer_id] < 0.0:
                st.on_hand[retailer_id] = 0.0

        # 4. sentiment update feeding the next draw
        stockout = sum(unfulfilled.values()) > 0.0
        st.goodwill = goodwill_update(st.goodwill, stockout)

        # 5. reward on post-step stocks
        terms = self._reward_terms(filled, shipments, unfulfilled)
        reward = (cfg.alpha ** t) * (
            terms["SR"] - terms["PC"] - terms["HC"] - terms["PHC"]
            - terms["OC"] - terms["SP"] - terms["FK"]
        )

        st.u_prev = dict(unfulfilled)
        st.d_prev = dict(demand)
        st.t = t + 1

        all_ship = dict(shipments)
        all_ship.update(filled)  # reorder-edge shipments equal filled orders
        self.record.periods.append(PeriodRecord(
            t=t, actions=actions, filled=dict(filled), shipments=all_ship,
            demand=demand, effective_demand=eff_demand, unfulfilled=dict(unfulfilled),
            reward_terms=terms, reward=reward, sentiment=st.goodwill.s,
            on_hand=dict(st.on_hand),
            pipeline_totals={e.id: st.pipeline_total(e.id) for e in topo.reorder},
        ))
        result = StepResult(reward=reward, reward_terms=terms, shipments=all_ship,
                            filled=dict(filled), demand=demand,
                            unfulfilled=dict(unfulfilled), done=self.done)
        return self.observe(), result

    def _as_action_map(self, action) -> dict[str, float]:
        edges = self.topo.reorder
        if isinstance(action, Mapping):
            extra = set(action) - {e.id for e in edges}
            if extra:
                raise EpisodeError(f"unknown action edges {sorted(extra)}")
            return {e.id: float(action.get(e.id, 0.0)) for e in edges}
        values = np.asarray(action, dtype=float).ravel()
        if values.shape[0] != len(edges):
            raise EpisodeError(
                f"action length {values.shape[0]} != |E_r| = {len(edges)}")
        if np.any(np.isnan(values)):
            raise EpisodeError("action contains NaN")
        return {e.id: float(v) for e, v in zip(edges, values)}

    def _reward_terms(self, filled, shipments, unfulfilled) -> dict[str, float]:
        topo = self.topo
        st = self.state
        terms = {k: 0.0 for k in ("SR", "PC", "HC", "PHC", "OC", "SP", "FK")}
        for node in topo.managed_nodes:
            j = node.id
            out_reorder = topo.outbound_reorder(j)
            out_retail = topo.retail_out(j)
            in_reorder = topo.inbound_reorder(j)
            sr = sum(e.unit_price * filled[e.id] for e in out_reorder)
            sr += sum(d.unit_price * shipments[d.id] for d in out_retail)
            pc = sum(e.unit_price * filled[e.id] for e in in_reorder)
            hc = node.holding_cost * st.on_hand[j]
            phc = sum(e.pipeline_holding * st.pipeline_total(e.id) for e in in_reorder)
            out_units = (sum(filled[e.id] for e in out_reorder)
                         + sum(shipments[d.id] for d in out_retail))
            oc = (node.operating_cost / node.yield_factor) * out_units
            sp = sum(d.shortage_penalty * unfulfilled[d.id] for d in out_retail)
            fk = sum(e.fixed_order_cost for e in in_reorder if filled[e.id] > 0.0)
            terms["SR"] += sr
            terms["PC"] += pc
            terms["HC"] += hc
            terms["PHC"] += phc
            terms["OC"] += oc
            terms["SP"] += sp
            terms["FK"] += fk
        return terms


def run_episode(cfg: EpisodeConfig, seed: int, policy) -> EpisodeRecord:
    """Roll one full episode; ``policy(obs, env) -> action vector``."""
    env = CoreEnv(cfg)
    obs = env.reset(seed)
    while not env.done:
        obs, _ = env.step(policy(obs, env))
    return env.record


# --------------------------------------------------------------------------
# KPIs

@dataclass(frozen=True)
class KpiSet:
    profit: float
    service_level: float
    fill_rate: float
    total_unfulfilled: float
    avg_inventory: float
    bullwhip: float
    bullwhip_by_echelon: dict[int, float]


def kpis(record: EpisodeRecord) -> KpiSet:
    """Episode KPIs from the audit ledger.

    Bullwhip uses population variance of aggregate per-echelon order signals
    (raw requests, clamped at zero) against aggregate realized retail demand;
    a zero-variance denominator with a zero-variance numerator reports 1.0.
    The scalar ``bullwhip`` is the most-upstream echelon's ratio.
    """
    topo = record.config.topology
    if not record.periods:
        raise ValueError("empty episode")
    n = len(record.periods)
    u_total = [sum(p.unfulfilled.values()) for p in record.periods]
    service = sum(1 for u in u_total if u <= 0.0) / n
    total_eff = sum(sum(p.effective_demand.values()) for p in record.periods)
    total_ship = sum(sum(p.shipments[d.id] for d in topo.retail) for p in record.periods)
    fill = 1.0 if total_eff <= 0.0 else total_ship / total_eff
    avg_inv = sum(sum(p.on_hand.values()) for p in record.periods) / n

    levels = topo_mod.echelon_levels(topo)
    demand_series = np.array(
        [sum(p.demand.values()) for p in record.periods], dtype=float)
    var_d = float(np.var(demand_series))
    ratios: dict[int, float] = {}
    for level in sorted(set(levels.values())):
        members = [nid for nid, lv in levels.items() if lv == level]
        orders = np.array([
            sum(max(p.actions[e.id], 0.0)
                for nid in members for e in topo.inbound_reorder(nid))
            for p in record.periods
        ])
        var_o = float(np.var(orders))
        if var_d < _EPS:
            ratios[level] = 1.0 if var_o < _EPS else math.inf
        else:
            ratios[level] = var_o / var_d
    top = max(ratios) if ratios else 1
    return KpiSet(
        profit=record.profit,
        service_level=service,
        fill_rate=fill,
        total_unfulfilled=float(sum(u_total)),
        avg_inventory=avg_inv,
        bullwhip=ratios.get(top, 1.0),
        bullwhip_by_echelon=ratios,
    )


# --------------------------------------------------------------------------
# Ledger replay: the independent conservation check

def replay_balance_errors(record: EpisodeRecord) -> tuple[float, float]:
    """Recompute the stock trajectory and pipeline totals straight from the
    recorded fills and shipments; return the maximum absolute deviation from
    the stored snapshots (material balance, pipeline identity).
    """
    topo = record.config.topology
    x = dict(record.initial_on_hand)
    fills_hist: dict[str, list[float]] = {e.id: [] for e in topo.reorder}
    max_x_err = 0.0
    max_y_err = 0.0
    for p in record.periods:
        t = p.t
        for node in topo.managed_nodes:
            j = node.id
            arrivals = 0.0
            for e in topo.inbound_reorder(j):
                tau = t - e.lead_time
                if tau == t:
                    arrivals += p.filled[e.id]
                elif tau >= 0:
                    arrivals += fills_hist[e.id][tau]
            out = sum(p.filled[e.id] for e in topo.outbound_reorder(j))
            out += sum(p.shipments[d.id] for d in topo.retail_out(j))
            x[j] = x[j] + arrivals - out / node.yield_factor
            max_x_err = max(max_x_err, abs(x[j] - p.on_hand[j]))
        for e in topo.reorder:
            fills_hist[e.id].append(p.filled[e.id])
            in_transit = sum(
                fills_hist[e.id][tau]
                for tau in range(max(0, t - e.lead_time + 1), t + 1)
            )
            max_y_err = max(max_y_err, abs(in_transit - p.pipeline_totals[e.id]))
    return max_x_err, max_y_err
