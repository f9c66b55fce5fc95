"""Language-neutral episode protocol: line-delimited JSON messages over
stdio or a local socket, so external controllers drive the exact same
transition kernel as in-process agents.

Message flow per connection::

    server: hello                      # layout, bounds, protocol version
    client: reset {seed?}
    server: observation {t, vector, context?}
    client: action {values, scaled?}
    server: step_result {...}
    server: observation | episode_done {profit, kpis}
    ...
    client: reset | EOF

A malformed action (bad JSON, wrong length, NaN) produces an ``error``
message and terminates the episode as failed; the client may reset and try
again. Action bounds for the scaled interface are published in ``hello``
and never assumed by the client.
"""

from __future__ import annotations

import json
import socket as socket_mod
import sys
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import defaults
from .core import CoreEnv, EpisodeConfig, Observation, kpis, observation_layout
from .demand import exogenous_mean
from .topology import throughput_shares

MESSAGE_TYPES = ("hello", "reset", "observation", "action", "step_result",
                 "episode_done", "error")


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type: str
    payload: dict
    protocol_version: int = defaults.PROTOCOL_VERSION

    def to_json(self) -> str:
        return json.dumps({"type": self.type, "protocol_version": self.protocol_version,
                           "payload": self.payload}, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "WireMessage":
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise WireError(f"malformed JSON: {exc}") from exc
        if not isinstance(raw, dict) or "type" not in raw:
            raise WireError("message must be an object with a 'type'")
        if raw["type"] not in MESSAGE_TYPES:
            raise WireError(f"unknown message type {raw['type']!r}")
        version = raw.get("protocol_version", defaults.PROTOCOL_VERSION)
        if version != defaults.PROTOCOL_VERSION:
            raise WireError(f"unsupported protocol version {version!r}")
        payload = raw.get("payload", {})
        if not isinstance(payload, dict):
            raise WireError("payload must be an object")
        return WireMessage(type=raw["type"], payload=payload, protocol_version=version)


# --------------------------------------------------------------------------
# Action bounds and rescaling

def action_bounds(cfg: EpisodeConfig) -> dict[str, float]:
    """Per-edge native bound for the [-1, 1] interface: twice the mean flow
    over the edge's lead time (at least one period)."""
    topo = cfg.topology
    means = {}
    for d in topo.retail:
        path = [exogenous_mean(cfg.demand[d.id], t) for t in range(cfg.horizon)]
        means[d.id] = sum(path) / len(path)
    shares = throughput_shares(topo, means)
    return {
        e.id: defaults.ACTION_BOUND_PERIODS * shares[e.id] * max(e.lead_time, 1)
        for e in topo.reorder
    }


def rescale_action(scaled, bounds) -> tuple[np.ndarray, bool]:
    """Affine map from [-1, 1] onto [0, bound] per edge; out-of-range inputs
    are clamped and flagged."""
    values = np.asarray(scaled, dtype=float)
    b = np.asarray(bounds, dtype=float)
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise WireError("bounds must be finite and positive")
    clamped = bool(np.any(values < -1.0) or np.any(values > 1.0))
    values = np.clip(values, -1.0, 1.0)
    return (values + 1.0) * 0.5 * b, clamped


# --------------------------------------------------------------------------
# Server

class WireServer:
    """Serves episodes of one configuration to a connected client."""

    def __init__(self, cfg: EpisodeConfig, default_seed: int = 0,
                 scenario_id: str | None = None):
        self.cfg = cfg
        self.default_seed = default_seed
        self.scenario_id = scenario_id
        self.bounds = action_bounds(cfg)

    def hello_payload(self) -> dict:
        topo = self.cfg.topology
        return {
            "protocol_version": defaults.PROTOCOL_VERSION,
            "scenario": self.scenario_id,
            "topology": topo.name,
            "horizon": self.cfg.horizon,
            "fulfillment": self.cfg.fulfillment,
            "goodwill_enabled": self.cfg.goodwill_enabled,
            "info_tier": self.cfg.info_tier,
            "action_dim": len(topo.reorder),
            "action_edges": [
                {"id": e.id, "lead_time": e.lead_time, "bound": self.bounds[e.id]}
                for e in topo.reorder
            ],
            "retail_edges": [d.id for d in topo.retail],
            "nodes": [n.id for n in topo.nodes],
            "observation_dim": topo.observation_dim(),
            "observation_layout": observation_layout(topo),
            "default_seed": self.default_seed,
        }

    def _obs_message(self, obs: Observation) -> WireMessage:
        payload = {"t": obs.t, "vector": [float(v) for v in obs.vector]}
        if obs.context is not None:
            payload["context"] = obs.context
        return WireMessage("observation", payload)

    def serve(self, recv: Callable[[], str | None],
              send: Callable[[str], None], episodes: int | None = None) -> int:
        """Run episodes until the client disconnects or the episode budget is
        exhausted; returns the number of completed episodes."""
        send(WireMessage("hello", self.hello_payload()).to_json())
        env = CoreEnv(self.cfg)
        completed = 0
        in_episode = False
        while episodes is None or completed < episodes:
            line = recv()
            if line is None:
                break
            line = line.strip()
            if not line:
                continue
            try:
                msg = WireMessage.from_json(line)
                if msg.type == "reset":
                    seed = int(msg.payload.get("seed", self.default_seed))
                    obs = env.reset(seed)
                    in_episode = True
                    send(self._obs_message(obs).to_json())
                elif msg.type == "action":
                    if not in_episode:
                        raise WireError("action before reset")
                    obs, result = env.step(self._decode_action(msg.payload))
                    send(WireMessage("step_result", {
                        "t": obs.t - 1,
                        "reward": result.reward,
                        "reward_terms": result.reward_terms,
                        "filled": result.filled,
                        "shipments": result.shipments,
                        "demand": result.demand,
                        "unfulfilled": result.unfulfilled,
                        "done": result.done,
                    }).to_json())
                    if result.done:
                        in_episode = False
                        completed += 1
                        k = kpis(env.record)
                        send(WireMessage("episode_done", {
                            "profit": env.record.profit,
                            "kpis": {
                                "service_level": k.service_level,
                                "fill_rate": k.fill_rate,
                                "unfulfilled": k.total_unfulfilled,
                                "avg_inventory": k.avg_inventory,
                                "bullwhip": k.bullwhip,
                            },
                        }).to_json())
                    else:
                        send(self._obs_message(obs).to_json())
                else:
                    raise WireError(f"unexpected client message {msg.type!r}")
            except WireError as exc:
                in_episode = False
                send(WireMessage("error", {"message": str(exc),
                                           "episode_failed": True}).to_json())
        return completed

    def _decode_action(self, payload: Mapping) -> np.ndarray:
        if "values" not in payload:
            raise WireError("action payload needs 'values'")
        try:
            values = np.asarray([float(v) for v in payload["values"]], dtype=float)
        except (TypeError, ValueError) as exc:
            raise WireError(f"non-numeric action: {exc}") from exc
        n = len(self.cfg.topology.reorder)
        if values.shape != (n,):
            raise WireError(f"action length {values.size} != action_dim {n}")
        if np.any(np.isnan(values)):
            raise WireError("action contains NaN")
        if payload.get("scaled", False):
            bounds = [self.bounds[e.id] for e in self.cfg.topology.reorder]
            values, _ = rescale_action(values, bounds)
        return values


# --------------------------------------------------------------------------
# Client-side observation reconstruction (and transports)

def observation_from_wire(payload: Mapping, hello: Mapping) -> Observation:
    """Rebuild a structured Observation from an observation message plus the
    hello metadata; used by in-process clients and the protocol tests."""
    vector = np.asarray(payload["vector"], dtype=float)
    segs = {s["name"]: (s["offset"], s["length"])
            for s in hello["observation_layout"]}
    retail = list(hello["retail_edges"])
    nodes = list(hello["nodes"])
    edges = [e["id"] for e in hello["action_edges"]]
    l_max = (segs["pipeline"][1] // len(edges)) if edges else 0

    def seg(name):
        off, length = segs[name]
        return vector[off:off + length]

    d_prev = dict(zip(retail, map(float, seg("d_prev"))))
    u_prev = dict(zip(retail, map(float, seg("u_prev"))))
    on_hand = dict(zip(nodes, map(float, seg("on_hand"))))
    pipe_flat = seg("pipeline")
    pipeline = {eid: tuple(map(float, pipe_flat[i * l_max:(i + 1) * l_max]))
                for i, eid in enumerate(edges)}
    feats = tuple(map(float, seg("features")))
    return Observation(vector=vector, t=int(payload["t"]), d_prev=d_prev,
                       u_prev=u_prev, on_hand=on_hand, pipeline=pipeline,
                       features=(feats[0], feats[1]),
                       context=payload.get("context"))


def serve_stdio(cfg: EpisodeConfig, default_seed: int = 0,
                scenario_id: str | None = None,
                episodes: int | None = None) -> int:
    """Serve over this process's stdin/stdout."""
    server = WireServer(cfg, default_seed, scenario_id)

    def recv():
        line = sys.stdin.readline()
        return line if line else None

    def send(text: str):
        sys.stdout.write(text + "\n")
        sys.stdout.flush()

    return server.serve(recv, send, episodes=episodes)


def serve_socket(cfg: EpisodeConfig, port: int, host: str = "127.0.0.1",
                 default_seed: int = 0, scenario_id: str | None = None,
                 episodes: int | None = None) -> int:
    """Serve one client over a local TCP socket."""
    server = WireServer(cfg, default_seed, scenario_id)
    with socket_mod.socket() as sock:
        sock.setsockopt(socket_mod.SOL_SOCKET, socket_mod.SO_REUSEADDR, 1)
        sock.bind((host, port))
        sock.listen(1)
        conn, _ = sock.accept()
        with conn, conn.makefile("rw", encoding="utf-8") as stream:
            def recv():
                line = stream.readline()
                return line if line else None

            def send(text: str):
                stream.write(text + "\n")
                stream.flush()

            return server.serve(recv, send, episodes=episodes)
