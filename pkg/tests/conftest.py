import numpy as np
import pytest

from invbench.core import EpisodeConfig
from invbench.demand import DemandModel
from invbench.topology import load_topology

SINGLE_RETAILER = """
name: single
nodes:
  - {id: src, kind: raw_source}
  - {id: r1, kind: retailer, holding_cost: 0.5}
  - {id: mkt, kind: market}
edges:
  - {id: src-r1, from: src, to: r1, kind: reorder, lead_time: 1,
     unit_price: 3.0, pipeline_holding: 0.05}
  - {id: r1-mkt, from: r1, to: mkt, kind: retail_demand,
     unit_price: 10.0, shortage_penalty: 2.0}
"""

TWO_TIER = """
name: twotier
nodes:
  - {id: src, kind: raw_source}
  - {id: w1, kind: distributor, holding_cost: 0.2, operating_cost: 0.05}
  - {id: r1, kind: retailer, holding_cost: 0.4, operating_cost: 0.05}
  - {id: mkt, kind: market}
edges:
  - {id: src-w1, from: src, to: w1, kind: reorder, lead_time: 1,
     unit_price: 2.0, pipeline_holding: 0.02}
  - {id: w1-r1, from: w1, to: r1, kind: reorder, lead_time: 1,
     unit_price: 4.0, pipeline_holding: 0.03}
  - {id: r1-mkt, from: r1, to: mkt, kind: retail_demand,
     unit_price: 9.0, shortage_penalty: 1.5}
"""


@pytest.fixture
def single_retailer():
    return load_topology(SINGLE_RETAILER)


@pytest.fixture
def two_tier():
    return load_topology(TWO_TIER)


def trace_config(topo, series, horizon=None, fulfillment="backlog",
                 initial=None, alpha=1.0, info_tier="blind"):
    """Episode config replaying a fixed demand series on every retail edge."""
    horizon = horizon if horizon is not None else len(series)
    demand = {
        d.id: DemandModel(base_mean=float(np.mean(series)),
                          base_process="deterministic_trace",
                          trace=tuple(float(v) for v in series))
        for d in topo.retail
    }
    return EpisodeConfig(topology=topo, demand=demand, horizon=horizon,
                         fulfillment=fulfillment, initial_inventory=initial,
                         alpha=alpha, info_tier=info_tier)


def poisson_config(topo, mean=20.0, horizon=30, fulfillment="backlog",
                   goodwill=False, initial=None, info_tier="blind"):
    demand = {d.id: DemandModel(base_mean=mean) for d in topo.retail}
    return EpisodeConfig(topology=topo, demand=demand, horizon=horizon,
                         fulfillment=fulfillment, goodwill_enabled=goodwill,
                         initial_inventory=initial, info_tier=info_tier)
