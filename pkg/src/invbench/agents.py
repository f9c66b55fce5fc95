"""Classical replenishment heuristics under the shared action contract.

All four families are centralized, graph-aware liftings of single-location
rules: the retailer-facing order comes from the family's own target logic,
and upstream links run pass-through base-stock policies sized to the
expected flow through them. Blind variants estimate demand from realized
history only; informed variants read the current exogenous mean from the
observation's demand-context block. Apart from that estimate, blind and
informed share identical code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from . import defaults
from .core import Observation
from .topology import Topology, throughput_shares, topological_nodes


@dataclass(frozen=True)
class EnvView:
    """What an agent may know about the episode besides its observations."""

    topology: Topology
    horizon: int
    fulfillment: str
    alpha: float = 1.0
    goodwill_enabled: bool = False
    prior_mean: float = defaults.PRIOR_MEAN


@dataclass(frozen=True)
class DemandEstimate:
    mean: float
    std: float
    source: str  # history | informed


def estimate_demand(history, tier: str, informed_mean: float | None = None,
                    prior_mean: float = defaults.PRIOR_MEAN) -> DemandEstimate:
    """Mean/std of per-period demand.

    Blind estimates use the full realized history (sample std, floored at
    the Poisson value sqrt(mean)); before any observation the documented
    prior applies. Informed estimates take the declared exogenous mean with
    Poisson moments.
    """
    if tier == "informed":
        if informed_mean is None:
            raise ValueError("informed tier requires the declared mean")
        m = max(0.0, float(informed_mean))
        return DemandEstimate(mean=m, std=math.sqrt(m), source="informed")
    values = [float(v) for v in history]
    if not values:
        return DemandEstimate(mean=prior_mean, std=math.sqrt(prior_mean),
                              source="history")
    mean = sum(values) / len(values)
    if len(values) >= 2:
        var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
        std = math.sqrt(var)
    else:
        std = 0.0
    return DemandEstimate(mean=mean, std=max(std, math.sqrt(max(mean, 0.0))),
                          source="history")


def ss_order(position: float, reorder_point: float, order_up_to: float) -> float:
    """The (s, S) decision: refill to S when the position crosses s."""
    if position < reorder_point:
        return max(0.0, order_up_to - position)
    return 0.0


def critical_ratio_target(mean: float, shortage: float, holding: float) -> int:
    """Smallest integer q with Poisson(mean) CDF(q) >= shortage/(shortage+holding)."""
    if shortage + holding <= 0.0:
        raise ValueError("critical ratio undefined: shortage + holding = 0")
    ratio = shortage / (shortage + holding)
    if ratio <= 0.0 or mean <= 0.0:
        return 0
    ratio = min(ratio, 1.0 - 1e-12)
    return int(poisson.ppf(ratio, mean))


def _input_order_cap(node, lead: int, position: float) -> float:
    """Factories convert input at a bounded rate, so ordering more input
    than the plant can ship before the next replenishment cycle only adds
    holding cost. Unconstrained nodes are not capped."""
    cap = node.capacity()
    if not math.isfinite(cap):
        return math.inf
    max_useful = (cap / node.yield_factor) * (lead + 2)
    return max(0.0, max_useful - position)


# --------------------------------------------------------------------------

class HeuristicAgent:
    """Shared plumbing: per-edge demand history, estimates, and the upstream
    pass-through lifting. Subclasses implement the retail-node order."""

    family = "heuristic"

    def __init__(self, tier: str = "blind"):
        if tier not in ("blind", "informed"):
            raise ValueError(f"unknown tier {tier!r}")
        self.tier = tier
        self.view: EnvView | None = None
        self.history: dict[str, list[float]] = {}

    @property
    def name(self) -> str:
        return self.family + ("-I" if self.tier == "informed" else "")

    def begin(self, view: EnvView, seed: int) -> None:
        self.view = view
        self.history = {d.id: [] for d in view.topology.retail}

    def observe_demand(self, obs: Observation) -> None:
        if obs.t >= 1:
            for eid, val in obs.d_prev.items():
                self.history[eid].append(val)

    def estimates(self, obs: Observation) -> dict[str, DemandEstimate]:
        out = {}
        for d in self.view.topology.retail:
            informed_mean = None
            if self.tier == "informed":
                if obs.context is None:
                    raise ValueError("informed agent needs demand context")
                # Sentiment multiplies the declared mean into the effective one.
                informed_mean = obs.context[d.id]["mean"] * obs.sentiment
            out[d.id] = estimate_demand(self.history[d.id], self.tier,
                                        informed_mean=informed_mean,
                                        prior_mean=self.view.prior_mean)
        return out

    def act(self, obs: Observation) -> np.ndarray:
        self.observe_demand(obs)
        est = self.estimates(obs)
        orders = self.retail_orders(obs, est)
        self.upstream_orders(obs, est, orders)
        topo = self.view.topology
        return np.array([max(0.0, orders.get(e.id, 0.0)) for e in topo.reorder])

    # -- retail-node logic, per family ---------------------------------------

    def retail_orders(self, obs, est) -> dict[str, float]:
        raise NotImplementedError

    def retail_node_order(self, obs, node_id: str, target: float) -> dict[str, float]:
        """Order up to ``target`` on the node's inventory position, split
        equally across its inbound links."""
        topo = self.view.topology
        inbound = topo.inbound_reorder(node_id)
        if not inbound:
            return {}
        position = obs.on_hand[node_id] + sum(sum(obs.pipeline[e.id]) for e in inbound)
        backlog = 0.0
        if self.view.fulfillment == "backlog":
            backlog = sum(obs.u_prev[d.id] for d in topo.retail_out(node_id))
        qty = max(0.0, target - position + backlog)
        return {e.id: qty / len(inbound) for e in inbound}

    def retail_lead_time(self, node_id: str) -> int:
        inbound = self.view.topology.inbound_reorder(node_id)
        return max((e.lead_time for e in inbound), default=0)

    # -- upstream lifting ------------------------------------------------------

    def upstream_orders(self, obs, est, orders: dict[str, float]) -> None:
        """Graph-aware lifting for the non-retail tiers: each node passes
        through the requests just placed on its outbound links (inflated by
        its yield loss) and orders up to a base-stock covering the expected
        flow over its own inbound lead time. Walks downstream-first so every
        node sees the requests it must serve this period."""
        topo = self.view.topology
        retail_means = {d.id: est[d.id].mean for d in topo.retail}
        shares = throughput_shares(topo, retail_means)
        total_mean = sum(retail_means.values())
        total_std = math.sqrt(sum(e.std ** 2 for e in est.values()))
        for nid in reversed(topological_nodes(topo)):
            node = topo.node(nid)
            if not node.managed or node.kind == "retailer":
                continue
            inbound = topo.inbound_reorder(nid)
            if not inbound:
                continue
            need_now = sum(orders.get(e.id, 0.0)
                           for e in topo.outbound_reorder(nid)) / node.yield_factor
            flow_in = sum(shares[e.id] for e in inbound)
            sigma = total_std * (flow_in / total_mean) if total_mean > 0 else 0.0
            lead = max(e.lead_time for e in inbound)
            cover = flow_in * (lead + 1) + defaults.Z_SAFETY * sigma * math.sqrt(lead + 1)
            position = obs.on_hand[nid] + sum(sum(obs.pipeline[e.id]) for e in inbound)
            qty = max(0.0, need_now + cover - position)
            qty = min(qty, _input_order_cap(node, lead, position))
            for e in inbound:
                orders[e.id] = qty / len(inbound)


class NewsvendorAgent(HeuristicAgent):
    """Critical-ratio base-stock on the retailer's protection interval."""

    family = "newsvendor"

    def retail_orders(self, obs, est) -> dict[str, float]:
        topo = self.view.topology
        orders: dict[str, float] = {}
        for node in topo.managed_nodes:
            if node.kind != "retailer":
                continue
            retail = topo.retail_out(node.id)
            if not retail:
                continue
            shortage = max(d.shortage_penalty for d in retail)
            mean = sum(est[d.id].mean for d in retail)
            protect = self.retail_lead_time(node.id) + 1
            target = critical_ratio_target(mean * protect, shortage,
                                           node.holding_cost)
            orders.update(self.retail_node_order(obs, node.id, float(target)))
        return orders


class SsAgent(HeuristicAgent):
    """(s, S): reorder when the position crosses s, refill to S = s + batch."""

    family = "ss"

    def retail_orders(self, obs, est) -> dict[str, float]:
        topo = self.view.topology
        orders: dict[str, float] = {}
        for node in topo.managed_nodes:
            if node.kind != "retailer":
                continue
            retail = topo.retail_out(node.id)
            if not retail:
                continue
            mean = sum(est[d.id].mean for d in retail)
            std = math.sqrt(sum(est[d.id].std ** 2 for d in retail))
            lead = self.retail_lead_time(node.id)
            s_point = mean * lead + defaults.Z_SAFETY * std * math.sqrt(lead)
            s_level = s_point + defaults.BATCH_PERIODS * mean
            inbound = topo.inbound_reorder(node.id)
            if not inbound:
                continue
            position = obs.on_hand[node.id] + sum(
                sum(obs.pipeline[e.id]) for e in inbound)
            if self.view.fulfillment == "backlog":
                position -= sum(obs.u_prev[d.id] for d in retail)
            qty = ss_order(position, s_point, s_level)
            for e in inbound:
                orders[e.id] = qty / len(inbound)
        return orders


class ExpSmoothAgent(HeuristicAgent):
    """Holt linear smoothing drives the forecast; order up to the forecast
    over the protection interval plus a safety buffer."""

    family = "expsmooth"

    def begin(self, view, seed) -> None:
        super().begin(view, seed)
        self.level: dict[str, float] = {}
        self.trend: dict[str, float] = {}

    def observe_demand(self, obs) -> None:
        if obs.t >= 1:
            for eid, y in obs.d_prev.items():
                self.history[eid].append(y)
                if eid not in self.level:
                    self.level[eid] = y
                    self.trend[eid] = 0.0
                else:
                    prev = self.level[eid]
                    self.level[eid] = (defaults.HOLT_ALPHA * y
                                       + (1 - defaults.HOLT_ALPHA) * (prev + self.trend[eid]))
                    self.trend[eid] = (defaults.HOLT_BETA * (self.level[eid] - prev)
                                       + (1 - defaults.HOLT_BETA) * self.trend[eid])

    def forecast(self, eid: str, steps: int, fallback: float) -> list[float]:
        if eid not in self.level:
            return [fallback] * steps
        return [max(0.0, self.level[eid] + h * self.trend[eid])
                for h in range(1, steps + 1)]

    def retail_orders(self, obs, est) -> dict[str, float]:
        topo = self.view.topology
        orders: dict[str, float] = {}
        for node in topo.managed_nodes:
            if node.kind != "retailer":
                continue
            retail = topo.retail_out(node.id)
            if not retail:
                continue
            protect = self.retail_lead_time(node.id) + 1
            demand_sum = 0.0
            for d in retail:
                demand_sum += sum(self.forecast(d.id, protect, est[d.id].mean))
            std = math.sqrt(sum(est[d.id].std ** 2 for d in retail))
            target = demand_sum + defaults.Z_SAFETY * std * math.sqrt(protect)
            orders.update(self.retail_node_order(obs, node.id, target))
        return orders


class EchelonAgent(HeuristicAgent):
    """Echelon base-stock approximation: every node orders up to a target
    covering its cumulative downstream lead time, measured on its echelon
    inventory position (own stock plus share-weighted downstream stock)."""

    family = "echelon"

    def retail_orders(self, obs, est) -> dict[str, float]:
        # the echelon recursion covers the retailer tier as well
        return {}

    def upstream_orders(self, obs, est, orders: dict[str, float]) -> None:
        topo = self.view.topology
        retail_means = {d.id: est[d.id].mean for d in topo.retail}
        shares = throughput_shares(topo, retail_means)
        total_mean = sum(retail_means.values())
        total_std = math.sqrt(sum(e.std ** 2 for e in est.values()))
        flow = self._node_flows(shares, retail_means)
        reach = self._reach_fractions(shares)
        cum_lead = self._cumulative_leads()

        for node in topo.managed_nodes:
            inbound = topo.inbound_reorder(node.id)
            if not inbound:
                continue
            m_j = flow[node.id]
            sigma = total_std * (m_j / total_mean) if total_mean > 0 else 0.0
            lam = cum_lead[node.id]
            target = m_j * lam + defaults.Z_SAFETY * sigma * math.sqrt(lam)
            position = obs.on_hand[node.id] + sum(
                sum(obs.pipeline[e.id]) for e in inbound)
            for down in topo.managed_nodes:
                w = reach[node.id].get(down.id, 0.0)
                if down.id == node.id or w <= 0.0:
                    continue
                down_pos = obs.on_hand[down.id] + sum(
                    sum(obs.pipeline[e.id]) for e in topo.inbound_reorder(down.id))
                position += w * down_pos
            if self.view.fulfillment == "backlog":
                for d in topo.retail:
                    w = (1.0 if topo.node(d.from_node).id == node.id
                         else reach[node.id].get(d.from_node, 0.0))
                    position -= w * obs.u_prev[d.id]
            own_position = obs.on_hand[node.id] + sum(
                sum(obs.pipeline[e.id]) for e in inbound)
            lead = max(e.lead_time for e in inbound)
            qty = max(0.0, target - position)
            qty = min(qty, _input_order_cap(node, lead, own_position))
            for e in inbound:
                orders[e.id] = qty / len(inbound)

    def _node_flows(self, shares, retail_means) -> dict[str, float]:
        topo = self.view.topology
        flow = {}
        for node in topo.managed_nodes:
            out = sum(shares[e.id] for e in topo.outbound_reorder(node.id))
            out += sum(retail_means[d.id] for d in topo.retail_out(node.id))
            flow[node.id] = out
        return flow

    def _reach_fractions(self, shares) -> dict[str, dict[str, float]]:
        """reach[j][d]: fraction of node d's inflow that passed through j,
        composed along the topological order so transitive paths accumulate."""
        topo = self.view.topology
        order = [nid for nid in topological_nodes(topo) if topo.node(nid).managed]
        reach: dict[str, dict[str, float]] = {nid: {nid: 1.0} for nid in order}
        for d in order:
            inbound = [e for e in topo.inbound_reorder(d)
                       if topo.node(e.from_node).managed]
            total_in = sum(shares[e.id] for e in inbound)
            if total_in <= 0:
                continue
            for e in inbound:
                w_edge = shares[e.id] / total_in
                for j in order:
                    frac = reach[j].get(e.from_node, 0.0)
                    if frac:
                        reach[j][d] = reach[j].get(d, 0.0) + w_edge * frac
        return reach

    def _cumulative_leads(self) -> dict[str, float]:
        """Coverage horizon per node: each hop costs its lead time plus one
        period (orders are filled before arrivals land, so stock arriving at
        t first ships at t+1), plus a review period at the retail tier."""
        topo = self.view.topology
        leads: dict[str, float] = {}

        def lam(node_id: str) -> float:
            if node_id in leads:
                return leads[node_id]
            node = topo.node(node_id)
            own = max((e.lead_time for e in topo.inbound_reorder(node_id)), default=0)
            if node.kind == "retailer":
                leads[node_id] = own + 2
            else:
                succ = [e.to_node for e in topo.outbound_reorder(node_id)
                        if topo.node(e.to_node).managed]
                leads[node_id] = own + 1 + max((lam(s) for s in succ), default=1)
            return leads[node_id]

        for n in topo.managed_nodes:
            lam(n.id)
        return leads


HEURISTIC_FAMILIES = {
    "newsvendor": NewsvendorAgent,
    "ss": SsAgent,
    "expsmooth": ExpSmoothAgent,
    "echelon": EchelonAgent,
}


def make_heuristic(agent_id: str) -> HeuristicAgent:
    base = agent_id[:-2] if agent_id.endswith("-I") else agent_id
    tier = "informed" if agent_id.endswith("-I") else "blind"
    if base not in HEURISTIC_FAMILIES:
        raise KeyError(f"unknown heuristic {agent_id!r}")
    return HEURISTIC_FAMILIES[base](tier=tier)
