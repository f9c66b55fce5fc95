"""invbench: a deterministic multi-echelon inventory-control simulator and
cross-paradigm benchmark harness.

The package is organized around a single transition kernel (:mod:`.core`)
driven by interchangeable controllers: classical heuristics (:mod:`.agents`),
LP-based planners (:mod:`.optim`), or external processes speaking the wire
protocol (:mod:`.wire`). The benchmark grid, seeded evaluation runs, and
reporting live in :mod:`.bench`.
"""

from .core import CoreEnv, EpisodeConfig, Observation, StepResult, kpis, run_episode
from .demand import DemandModel, GoodwillState, drift_threshold
from .topology import Topology, builtin, load_topology

__version__ = "0.1.0"

__all__ = [
    "CoreEnv",
    "EpisodeConfig",
    "Observation",
    "StepResult",
    "kpis",
    "run_episode",
    "DemandModel",
    "GoodwillState",
    "drift_threshold",
    "Topology",
    "builtin",
    "load_topology",
    "__version__",
]
