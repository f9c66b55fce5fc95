"""Wire-protocol client exposing engine episodes through the standard
``reset`` / ``step`` / ``close`` environment API.

The engine is reached either by launching its serve command as a child
process (stdio transport) or by connecting to a local socket. Observation
and action spaces are declared from the engine's ``hello`` metadata, never
assumed client-side.
"""

from __future__ import annotations

import json
import socket
import subprocess
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROTOCOL_VERSION = 1


class EngineError(RuntimeError):
    """The engine reported an error or closed the stream unexpectedly."""


@dataclass(frozen=True)
class AdapterConfig:
    """How to reach the engine and what to ask it for.

    Exactly one of ``command`` (serve argv, e.g.
    ``["python3", "-m", "invbench", "serve"]``) or ``socket_address`` must
    be given. With ``scaled_actions`` the env presents a [-1, 1] action box
    and forwards actions with the scaled flag; otherwise actions are native
    non-negative order quantities bounded by the engine-published limits.
    """

    scenario: str
    seed: int = 0
    command: Sequence[str] | None = None
    socket_address: tuple[str, int] | None = None
    scaled_actions: bool = False
    extra_args: Sequence[str] = field(default_factory=tuple)

    def __post_init__(self):
        if (self.command is None) == (self.socket_address is None):
            raise ValueError("exactly one of command or socket_address required")


@dataclass(frozen=True)
class BoxSpace:
    """Minimal box-space description (gymnasium-compatible fields)."""

    low: np.ndarray
    high: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.low.shape

    def contains(self, x) -> bool:
        arr = np.asarray(x, dtype=float)
        return (arr.shape == self.shape
                and bool(np.all(arr >= self.low - 1e-12))
                and bool(np.all(arr <= self.high + 1e-12)))


class _StdioTransport:
    def __init__(self, argv: Sequence[str]):
        self.proc = subprocess.Popen(
            list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def send(self, line: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv(self) -> str | None:
        assert self.proc.stdout is not None
        line = self.proc.stdout.readline()
        return line if line else None

    def close(self) -> None:
        if self.proc.poll() is None:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _SocketTransport:
    def __init__(self, address: tuple[str, int]):
        self.sock = socket.create_connection(address, timeout=30)
        self.stream = self.sock.makefile("rw", encoding="utf-8")

    def send(self, line: str) -> None:
        self.stream.write(line + "\n")
        self.stream.flush()

    def recv(self) -> str | None:
        line = self.stream.readline()
        return line if line else None

    def close(self) -> None:
        self.stream.close()
        self.sock.close()


class InventoryWireEnv:
    """One engine connection, episodes on demand.

    ``reset`` returns ``(observation, info)`` and ``step`` returns
    ``(observation, reward, terminated, truncated, info)``; ``info`` carries
    the engine's per-period reward decomposition verbatim, plus the final
    profit and KPI block on the terminal step. The terminal transition
    reuses the last received observation, since the protocol ends an episode
    with its summary rather than a post-terminal state.
    """

    def __init__(self, config: AdapterConfig):
        self.config = config
        if config.command is not None:
            argv = [*config.command, "--scenario", config.scenario,
                    "--seed", str(config.seed), *config.extra_args]
            self._transport = _StdioTransport(argv)
        else:
            self._transport = _SocketTransport(config.socket_address)
        self.hello = self._expect("hello")["payload"]
        if self.hello.get("protocol_version") != PROTOCOL_VERSION:
            raise EngineError(
                f"protocol version mismatch: {self.hello.get('protocol_version')}")
        dim = int(self.hello["observation_dim"])
        n_act = int(self.hello["action_dim"])
        bounds = np.array([e["bound"] for e in self.hello["action_edges"]])
        self.observation_space = BoxSpace(
            low=np.full(dim, -np.inf), high=np.full(dim, np.inf))
        if config.scaled_actions:
            self.action_space = BoxSpace(low=-np.ones(n_act), high=np.ones(n_act))
        else:
            self.action_space = BoxSpace(low=np.zeros(n_act), high=bounds)
        self._last_obs: np.ndarray | None = None
        self._episode_active = False

    # -- protocol plumbing --------------------------------------------------

    def _send(self, mtype: str, payload: dict) -> None:
        self._transport.send(json.dumps(
            {"type": mtype, "protocol_version": PROTOCOL_VERSION,
             "payload": payload}, separators=(",", ":")))

    def _recv(self) -> dict:
        line = self._transport.recv()
        if line is None:
            raise EngineError("engine closed the stream")
        msg = json.loads(line)
        if msg.get("type") == "error":
            self._episode_active = False
            raise EngineError(msg["payload"].get("message", "engine error"))
        return msg

    def _expect(self, mtype: str) -> dict:
        msg = self._recv()
        if msg.get("type") != mtype:
            raise EngineError(f"expected {mtype}, got {msg.get('type')}")
        return msg

    # -- env API --------------------------------------------------------------

    def reset(self, seed: int | None = None) -> tuple[np.ndarray, dict]:
        payload = {"seed": int(seed if seed is not None else self.config.seed)}
        self._send("reset", payload)
        obs_msg = self._expect("observation")["payload"]
        self._last_obs = np.asarray(obs_msg["vector"], dtype=float)
        self._episode_active = True
        info = {"t": obs_msg["t"]}
        if "context" in obs_msg:
            info["context"] = obs_msg["context"]
        return self._last_obs, info

    def step(self, action) -> tuple[np.ndarray, float, bool, bool, dict]:
        if not self._episode_active:
            raise EngineError("step before reset (or after episode end)")
        values = [float(v) for v in np.asarray(action, dtype=float).ravel()]
        self._send("action", {"values": values,
                              "scaled": self.config.scaled_actions})
        result = self._expect("step_result")["payload"]
        reward = float(result["reward"])
        terminated = bool(result["done"])
        info = {
            "t": result["t"],
            "reward_terms": result["reward_terms"],
            "demand": result["demand"],
            "unfulfilled": result["unfulfilled"],
            "filled": result["filled"],
        }
        if terminated:
            done_msg = self._expect("episode_done")["payload"]
            info["profit"] = done_msg["profit"]
            info["kpis"] = done_msg["kpis"]
            self._episode_active = False
            obs = self._last_obs
        else:
            obs_msg = self._expect("observation")["payload"]
            obs = np.asarray(obs_msg["vector"], dtype=float)
            if "context" in obs_msg:
                info["context"] = obs_msg["context"]
            self._last_obs = obs
        return obs, reward, terminated, False, info

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
