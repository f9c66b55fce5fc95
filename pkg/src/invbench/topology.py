"""Supply-chain graph definitions, validation, and the built-in benchmark networks.

A topology is a directed graph whose edges are either reorder links
(replenishment requests flow upstream, shipments flow downstream with a
lead time) or retail-demand links (a retailer facing an external market).
The graph restricted to reorder links must be a DAG. Managed nodes are
retailers, distributors, and factories; raw sources and markets sit at the
boundary and carry no costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import yaml

NODE_KINDS = ("raw_source", "factory", "distributor", "retailer", "market")
MANAGED_KINDS = ("factory", "distributor", "retailer")
EDGE_KINDS = ("reorder", "retail_demand")


class TopologyError(ValueError):
    """Raised when a topology spec fails parsing or validation."""


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    holding_cost: float = 0.0
    operating_cost: float = 0.0
    yield_factor: float = 1.0
    production_capacity: float | None = None

    @property
    def managed(self) -> bool:
        return self.kind in MANAGED_KINDS

    def capacity(self) -> float:
        return math.inf if self.production_capacity is None else self.production_capacity


@dataclass(frozen=True)
class EdgeSpec:
    id: str
    from_node: str
    to_node: str
    kind: str
    lead_time: int = 0
    unit_price: float = 0.0
    pipeline_holding: float = 0.0
    shortage_penalty: float = 0.0
    fixed_order_cost: float = 0.0


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    _node_index: Mapping[str, NodeSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_node_index", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> NodeSpec:
        return self._node_index[node_id]

    def _cache(self, key: str, compute):
        cached = getattr(self, "_memo", None)
        if cached is None:
            cached = {}
            object.__setattr__(self, "_memo", cached)
        if key not in cached:
            cached[key] = compute()
        return cached[key]

    @property
    def reorder(self) -> tuple[EdgeSpec, ...]:
        return self._cache("reorder", lambda: reorder_edges(self))

    @property
    def retail(self) -> tuple[EdgeSpec, ...]:
        return self._cache("retail", lambda: retail_edges(self))

    @property
    def managed_nodes(self) -> tuple[NodeSpec, ...]:
        return self._cache("managed",
                           lambda: tuple(n for n in self.nodes if n.managed))

    @property
    def max_lead_time(self) -> int:
        return self._cache("l_max", lambda: max(e.lead_time for e in self.reorder))

    def inbound_reorder(self, node_id: str) -> tuple[EdgeSpec, ...]:
        return self._cache(
            ("in", node_id),
            lambda: tuple(e for e in self.reorder if e.to_node == node_id))

    def outbound_reorder(self, node_id: str) -> tuple[EdgeSpec, ...]:
        return self._cache(
            ("out", node_id),
            lambda: tuple(e for e in self.reorder if e.from_node == node_id))

    def retail_out(self, node_id: str) -> tuple[EdgeSpec, ...]:
        return self._cache(
            ("retail_out", node_id),
            lambda: tuple(e for e in self.retail if e.from_node == node_id))

    def observation_dim(self, feature_dim: int = 2) -> int:
        """Length of the flat observation vector for this graph."""
        return (
            len(self.nodes)
            + 2 * len(self.retail)
            + len(self.reorder) * self.max_lead_time
            + feature_dim
        )


# --------------------------------------------------------------------------
# Deterministic edge ordering: this order defines the action-vector layout.

def topological_nodes(topo: Topology) -> list[str]:
    """Topological order over reorder edges, ties broken by node id."""
    ids = sorted(n.id for n in topo.nodes)
    indeg = {i: 0 for i in ids}
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for e in topo.edges:
        if e.kind != "reorder":
            continue
        succ[e.from_node].append(e.to_node)
        indeg[e.to_node] += 1
    ready = sorted(i for i in ids if indeg[i] == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in sorted(succ[node]):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(ids):
        raise TopologyError("cycle among reorder edges")
    return order


def reorder_edges(topo: Topology) -> tuple[EdgeSpec, ...]:
    """Reorder links sorted topologically by target node, then by edge id."""
    pos = {nid: i for i, nid in enumerate(topological_nodes(topo))}
    edges = [e for e in topo.edges if e.kind == "reorder"]
    edges.sort(key=lambda e: (pos[e.to_node], e.id))
    return tuple(edges)


def retail_edges(topo: Topology) -> tuple[EdgeSpec, ...]:
    edges = [e for e in topo.edges if e.kind == "retail_demand"]
    edges.sort(key=lambda e: e.id)
    return tuple(edges)


# --------------------------------------------------------------------------
# Parsing and validation

_NODE_KEYS = {
    "id", "kind", "holding_cost", "operating_cost", "yield", "production_capacity",
}
_EDGE_KEYS = {
    "id", "from", "to", "kind", "lead_time", "unit_price", "pipeline_holding",
    "shortage_penalty", "fixed_order_cost",
}


def _parse_node(raw: Mapping) -> NodeSpec:
    unknown = set(raw) - _NODE_KEYS
    if unknown:
        raise TopologyError(f"unknown node keys: {sorted(unknown)}")
    try:
        node = NodeSpec(
            id=str(raw["id"]),
            kind=str(raw["kind"]),
            holding_cost=float(raw.get("holding_cost", 0.0)),
            operating_cost=float(raw.get("operating_cost", 0.0)),
            yield_factor=float(raw.get("yield", 1.0)),
            production_capacity=(
                None if raw.get("production_capacity") is None
                else float(raw["production_capacity"])
            ),
        )
    except KeyError as exc:
        raise TopologyError(f"node missing required key {exc}") from exc
    return node


def _parse_edge(raw: Mapping) -> EdgeSpec:
    unknown = set(raw) - _EDGE_KEYS
    if unknown:
        raise TopologyError(f"unknown edge keys: {sorted(unknown)}")
    try:
        edge = EdgeSpec(
            id=str(raw["id"]),
            from_node=str(raw["from"]),
            to_node=str(raw["to"]),
            kind=str(raw["kind"]),
            lead_time=int(raw.get("lead_time", 0)),
            unit_price=float(raw.get("unit_price", 0.0)),
            pipeline_holding=float(raw.get("pipeline_holding", 0.0)),
            shortage_penalty=float(raw.get("shortage_penalty", 0.0)),
            fixed_order_cost=float(raw.get("fixed_order_cost", 0.0)),
        )
    except KeyError as exc:
        raise TopologyError(f"edge missing required key {exc}") from exc
    return edge


def validate(topo: Topology) -> Topology:
    node_ids = [n.id for n in topo.nodes]
    if len(set(node_ids)) != len(node_ids):
        raise TopologyError("duplicate node ids")
    index = {n.id: n for n in topo.nodes}

    for n in topo.nodes:
        if n.kind not in NODE_KINDS:
            raise TopologyError(f"node {n.id}: unknown kind {n.kind!r}")
        if not (0.0 < n.yield_factor <= 1.0):
            raise TopologyError(f"node {n.id}: yield must be in (0, 1]")
        if n.holding_cost < 0 or n.operating_cost < 0:
            raise TopologyError(f"node {n.id}: negative cost")
        if n.kind in ("raw_source", "market") and (n.holding_cost or n.operating_cost):
            raise TopologyError(f"node {n.id}: boundary nodes carry no costs")
        if n.production_capacity is not None:
            if n.kind != "factory":
                raise TopologyError(f"node {n.id}: capacity only applies to factories")
            if n.production_capacity < 0:
                raise TopologyError(f"node {n.id}: negative capacity")

    edge_ids = [e.id for e in topo.edges]
    if len(set(edge_ids)) != len(edge_ids):
        raise TopologyError("duplicate edge ids")

    n_reorder = n_retail = 0
    for e in topo.edges:
        if e.from_node not in index or e.to_node not in index:
            raise TopologyError(f"edge {e.id}: dangling node reference")
        if e.kind not in EDGE_KINDS:
            raise TopologyError(f"edge {e.id}: unknown kind {e.kind!r}")
        if min(e.lead_time, e.unit_price, e.pipeline_holding,
               e.shortage_penalty, e.fixed_order_cost) < 0:
            raise TopologyError(f"edge {e.id}: negative parameter")
        if e.kind == "reorder":
            n_reorder += 1
            if index[e.to_node].kind not in MANAGED_KINDS:
                raise TopologyError(f"edge {e.id}: reorder edges supply managed nodes")
            if index[e.from_node].kind in ("retailer", "market"):
                raise TopologyError(f"edge {e.id}: invalid reorder source")
        else:
            n_retail += 1
            if index[e.from_node].kind != "retailer" or index[e.to_node].kind != "market":
                raise TopologyError(
                    f"edge {e.id}: retail_demand must run retailer -> market"
                )
            if e.lead_time:
                raise TopologyError(f"edge {e.id}: retail_demand edges have no lead time")

    if n_reorder < 1:
        raise TopologyError("topology needs at least one reorder edge")
    if n_retail < 1:
        raise TopologyError("topology needs at least one retail_demand edge")

    topological_nodes(topo)  # raises on reorder cycles
    return topo


def load_topology(spec_text: str) -> Topology:
    """Parse and validate a topology from YAML or JSON text."""
    try:
        raw = yaml.safe_load(spec_text)
    except yaml.YAMLError as exc:
        raise TopologyError(f"topology parse failure: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise TopologyError("topology spec must be a mapping")
    unknown = set(raw) - {"name", "nodes", "edges"}
    if unknown:
        raise TopologyError(f"unknown top-level keys: {sorted(unknown)}")
    nodes = tuple(_parse_node(n) for n in raw.get("nodes", []))
    edges = tuple(_parse_edge(e) for e in raw.get("edges", []))
    topo = Topology(name=str(raw.get("name", "custom")), nodes=nodes, edges=edges)
    return validate(topo)


def to_dict(topo: Topology) -> dict:
    """Serialize back to the documented schema (round-trips through load_topology)."""
    nodes = []
    for n in topo.nodes:
        entry: dict = {"id": n.id, "kind": n.kind}
        if n.holding_cost:
            entry["holding_cost"] = n.holding_cost
        if n.operating_cost:
            entry["operating_cost"] = n.operating_cost
        if n.yield_factor != 1.0:
            entry["yield"] = n.yield_factor
        if n.production_capacity is not None:
            entry["production_capacity"] = n.production_capacity
        nodes.append(entry)
    edges = []
    for e in topo.edges:
        entry = {"id": e.id, "from": e.from_node, "to": e.to_node, "kind": e.kind}
        if e.kind == "reorder":
            entry["lead_time"] = e.lead_time
            entry["unit_price"] = e.unit_price
            if e.pipeline_holding:
                entry["pipeline_holding"] = e.pipeline_holding
            if e.fixed_order_cost:
                entry["fixed_order_cost"] = e.fixed_order_cost
        else:
            entry["unit_price"] = e.unit_price
            entry["shortage_penalty"] = e.shortage_penalty
        edges.append(entry)
    return {"name": topo.name, "nodes": nodes, "edges": edges}


def to_yaml(topo: Topology) -> str:
    return yaml.safe_dump(to_dict(topo), sort_keys=False)


def to_json(topo: Topology) -> str:
    return json.dumps(to_dict(topo), indent=2)


# --------------------------------------------------------------------------
# Built-in benchmark networks.
#
# The divergent default: two raw suppliers feed three capacity-constrained
# factories, which ship through two distributors to a single retailer facing
# one market. 9 nodes, 11 reorder links plus one retail-demand link.
# Economics are the repository's pinned defaults; they are chosen so that the
# stationary scenario is profitable at every tier for a plain base-stock
# policy (checked in the test suite).

_BASE_SPEC = {
    "name": "base",
    "nodes": [
        {"id": "raw1", "kind": "raw_source"},
        {"id": "raw2", "kind": "raw_source"},
        {"id": "fact1", "kind": "factory", "holding_cost": 0.2, "operating_cost": 0.10,
         "yield": 0.9, "production_capacity": 20},
        {"id": "fact2", "kind": "factory", "holding_cost": 0.2, "operating_cost": 0.10,
         "yield": 0.9, "production_capacity": 15},
        {"id": "fact3", "kind": "factory", "holding_cost": 0.2, "operating_cost": 0.10,
         "yield": 0.9, "production_capacity": 15},
        {"id": "dist1", "kind": "distributor", "holding_cost": 0.15, "operating_cost": 0.05},
        {"id": "dist2", "kind": "distributor", "holding_cost": 0.15, "operating_cost": 0.05},
        {"id": "ret1", "kind": "retailer", "holding_cost": 0.3, "operating_cost": 0.05},
        {"id": "market", "kind": "market"},
    ],
    "edges": [
        {"id": "raw1-fact1", "from": "raw1", "to": "fact1", "kind": "reorder",
         "lead_time": 2, "unit_price": 1.0, "pipeline_holding": 0.01},
        {"id": "raw1-fact2", "from": "raw1", "to": "fact2", "kind": "reorder",
         "lead_time": 2, "unit_price": 1.0, "pipeline_holding": 0.01},
        {"id": "raw2-fact3", "from": "raw2", "to": "fact3", "kind": "reorder",
         "lead_time": 3, "unit_price": 0.9, "pipeline_holding": 0.01},
        {"id": "fact1-dist1", "from": "fact1", "to": "dist1", "kind": "reorder",
         "lead_time": 2, "unit_price": 3.0, "pipeline_holding": 0.02},
        {"id": "fact1-dist2", "from": "fact1", "to": "dist2", "kind": "reorder",
         "lead_time": 2, "unit_price": 3.0, "pipeline_holding": 0.02},
        {"id": "fact2-dist1", "from": "fact2", "to": "dist1", "kind": "reorder",
         "lead_time": 1, "unit_price": 3.2, "pipeline_holding": 0.02},
        {"id": "fact2-dist2", "from": "fact2", "to": "dist2", "kind": "reorder",
         "lead_time": 2, "unit_price": 3.1, "pipeline_holding": 0.02},
        {"id": "fact3-dist1", "from": "fact3", "to": "dist1", "kind": "reorder",
         "lead_time": 3, "unit_price": 2.8, "pipeline_holding": 0.02},
        {"id": "fact3-dist2", "from": "fact3", "to": "dist2", "kind": "reorder",
         "lead_time": 2, "unit_price": 2.9, "pipeline_holding": 0.02},
        {"id": "dist1-ret1", "from": "dist1", "to": "ret1", "kind": "reorder",
         "lead_time": 1, "unit_price": 5.0, "pipeline_holding": 0.03},
        {"id": "dist2-ret1", "from": "dist2", "to": "ret1", "kind": "reorder",
         "lead_time": 2, "unit_price": 4.8, "pipeline_holding": 0.03},
        {"id": "ret1-market", "from": "ret1", "to": "market", "kind": "retail_demand",
         "unit_price": 10.0, "shortage_penalty": 2.0},
    ],
}

# The serial chain: five supply nodes in a line (raw source, factory,
# distributor, wholesaler, retailer) plus the market sink, giving four
# reorder links and one retail-demand link.
_SERIAL_SPEC = {
    "name": "serial",
    "nodes": [
        {"id": "raw", "kind": "raw_source"},
        {"id": "fact", "kind": "factory", "holding_cost": 0.15, "operating_cost": 0.10,
         "yield": 0.9, "production_capacity": 40},
        {"id": "dist", "kind": "distributor", "holding_cost": 0.15, "operating_cost": 0.05},
        {"id": "whole", "kind": "distributor", "holding_cost": 0.2, "operating_cost": 0.05},
        {"id": "ret", "kind": "retailer", "holding_cost": 0.3, "operating_cost": 0.05},
        {"id": "market", "kind": "market"},
    ],
    "edges": [
        {"id": "raw-fact", "from": "raw", "to": "fact", "kind": "reorder",
         "lead_time": 2, "unit_price": 1.0, "pipeline_holding": 0.01},
        {"id": "fact-dist", "from": "fact", "to": "dist", "kind": "reorder",
         "lead_time": 2, "unit_price": 3.0, "pipeline_holding": 0.02},
        {"id": "dist-whole", "from": "dist", "to": "whole", "kind": "reorder",
         "lead_time": 2, "unit_price": 4.0, "pipeline_holding": 0.02},
        {"id": "whole-ret", "from": "whole", "to": "ret", "kind": "reorder",
         "lead_time": 1, "unit_price": 5.5, "pipeline_holding": 0.03},
        {"id": "ret-market", "from": "ret", "to": "market", "kind": "retail_demand",
         "unit_price": 10.0, "shortage_penalty": 2.0},
    ],
}

# Per-topology initial stocks: every managed node starts with one period of
# mean retail demand so the chain is primed but not saturated.
INITIAL_INVENTORY = {
    "base": {"fact1": 20.0, "fact2": 20.0, "fact3": 20.0,
             "dist1": 20.0, "dist2": 20.0, "ret1": 20.0},
    "serial": {"fact": 20.0, "dist": 20.0, "whole": 20.0, "ret": 20.0},
}

BUILTIN_NAMES = ("base", "serial")


def builtin(name: str) -> Topology:
    """Return a canonical benchmark topology with the pinned default economics."""
    if name == "base":
        spec = _BASE_SPEC
    elif name == "serial":
        spec = _SERIAL_SPEC
    else:
        raise TopologyError(f"unknown built-in topology {name!r}")
    return load_topology(yaml.safe_dump(spec))


def echelon_levels(topo: Topology) -> dict[str, int]:
    """Echelon index per managed node: retailers are 1, their suppliers 2, etc.

    A node's level is one more than the highest level among its managed
    reorder successors (longest path to the retail tier).
    """
    levels: dict[str, int] = {}

    def level(node_id: str) -> int:
        if node_id in levels:
            return levels[node_id]
        node = topo.node(node_id)
        if node.kind == "retailer":
            levels[node_id] = 1
            return 1
        succ = [e.to_node for e in topo.outbound_reorder(node_id)
                if topo.node(e.to_node).managed]
        lv = 1 + max((level(s) for s in succ), default=0)
        levels[node_id] = lv
        return lv

    for n in topo.managed_nodes:
        level(n.id)
    return levels


def downstream_managed(topo: Topology, node_id: str) -> list[str]:
    """All managed nodes reachable from ``node_id`` over reorder edges."""
    seen: set[str] = set()
    stack = [e.to_node for e in topo.outbound_reorder(node_id)]
    while stack:
        nid = stack.pop()
        if nid in seen or not topo.node(nid).managed:
            continue
        seen.add(nid)
        stack.extend(e.to_node for e in topo.outbound_reorder(nid))
    return sorted(seen)


def throughput_shares(topo: Topology, retail_means: Mapping[str, float]) -> dict[str, float]:
    """Expected per-period flow on each reorder edge when demand equals
    ``retail_means`` (keyed by retail edge id) and inbound supply splits
    equally across a node's suppliers. Yield losses inflate upstream flow.
    """
    order = topological_nodes(topo)
    share: dict[str, float] = {}
    outflow: dict[str, float] = {n.id: 0.0 for n in topo.nodes}
    for d in topo.retail:
        outflow[d.from_node] += retail_means[d.id]
    # Walk downstream-first: a node's outbound shares are set while visiting
    # their target nodes, so its inbound split only needs one pass.
    for nid in reversed(order):
        node = topo.node(nid)
        if not node.managed:
            continue
        total_out = outflow[nid] + sum(share[e.id] for e in topo.outbound_reorder(nid))
        inbound = topo.inbound_reorder(nid)
        if not inbound:
            continue
        need = total_out / node.yield_factor
        for e in inbound:
            share[e.id] = need / len(inbound)
    return share
