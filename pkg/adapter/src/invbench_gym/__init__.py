"""Standard RL environment surface over the invbench wire protocol.

The adapter is deliberately dumb: every transition comes from the engine
process over line-delimited JSON, and nothing is cached, reshaped, or
re-rewarded on this side. The engine remains the single source of truth.
"""

from .env import AdapterConfig, BoxSpace, EngineError, InventoryWireEnv

__all__ = ["AdapterConfig", "BoxSpace", "EngineError", "InventoryWireEnv"]
__version__ = "0.1.0"
