"""Adapter acceptance: transcript equivalence against the raw wire, plus the
pass-through guarantees. The engine is only ever reached by launching its
serve command; nothing here imports the engine package."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from invbench_gym import AdapterConfig, EngineError, InventoryWireEnv

SERVE = [sys.executable, "-m", "invbench", "serve"]
SCENARIO = "base-stationary-exo-backlog"
SEED = 4


def make_env(scenario=SCENARIO, seed=SEED, scaled=False):
    return InventoryWireEnv(AdapterConfig(
        scenario=scenario, seed=seed, command=SERVE, scaled_actions=scaled))


def scripted_actions(hello, steps):
    """A deterministic 30-step policy: a fixed staircase per edge."""
    n = int(hello["action_dim"])
    return [[(5.0 + 3.0 * ((t + i) % 4)) for i in range(n)]
            for t in range(steps)]


class RawWireClient:
    """Independent line-JSON client used as the reference transcript."""

    def __init__(self, scenario, seed):
        self.proc = subprocess.Popen(
            SERVE + ["--scenario", scenario, "--seed", str(seed)],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)
        hello = self._recv()
        assert hello["type"] == "hello"
        self.hello = hello["payload"]

    def _send(self, mtype, payload):
        self.proc.stdin.write(json.dumps({"type": mtype, "payload": payload}) + "\n")
        self.proc.stdin.flush()

    def _recv(self):
        line = self.proc.stdout.readline()
        assert line, "engine closed"
        return json.loads(line)

    def run_episode(self, seed, actions):
        self._send("reset", {"seed": seed})
        obs = self._recv()
        assert obs["type"] == "observation"
        rewards = []
        for act in actions:
            self._send("action", {"values": act})
            res = self._recv()
            assert res["type"] == "step_result"
            rewards.append(res["payload"]["reward"])
            follow = self._recv()
            if res["payload"]["done"]:
                assert follow["type"] == "episode_done"
                return rewards, follow["payload"]
        raise AssertionError("episode never finished")

    def close(self):
        self.proc.stdin.close()
        self.proc.wait(timeout=5)


def test_transcript_equivalence_30_steps():
    """The secondary acceptance criterion: a 30-step scripted policy through
    the adapter matches the direct wire transcript reward for reward."""
    raw = RawWireClient(SCENARIO, SEED)
    actions = scripted_actions(raw.hello, steps=int(raw.hello["horizon"]))
    assert len(actions) == 30
    wire_rewards, wire_done = raw.run_episode(SEED, actions)
    raw.close()

    env = make_env()
    env.reset(seed=SEED)
    adapter_rewards = []
    info = {}
    for act in actions:
        _, reward, terminated, truncated, info = env.step(act)
        adapter_rewards.append(reward)
        assert not truncated
        if terminated:
            break
    env.close()

    assert len(adapter_rewards) == len(wire_rewards) == 30
    assert adapter_rewards == wire_rewards
    assert info["profit"] == wire_done["profit"]
    assert info["kpis"] == wire_done["kpis"]


def test_reset_returns_declared_vector_and_is_deterministic():
    with make_env() as env:
        dim = int(env.hello["observation_dim"])
        obs1, info = env.reset(seed=7)
        assert obs1.shape == (dim,)
        assert info["t"] == 0
    with make_env() as env:
        obs2, _ = env.reset(seed=7)
    assert np.array_equal(obs1, obs2)


def test_episode_terminates_at_horizon():
    with make_env() as env:
        obs, _ = env.reset()
        horizon = int(env.hello["horizon"])
        zero = [0.0] * int(env.hello["action_dim"])
        terminated = False
        steps = 0
        while not terminated:
            obs, reward, terminated, _, info = env.step(zero)
            steps += 1
            assert steps <= horizon
        assert steps == horizon
        assert "profit" in info and "kpis" in info


def test_reward_terms_passed_through():
    with make_env() as env:
        env.reset()
        _, reward, _, _, info = env.step([0.0] * int(env.hello["action_dim"]))
        terms = info["reward_terms"]
        assert set(terms) == {"SR", "PC", "HC", "PHC", "OC", "SP", "FK"}
        total = (terms["SR"] - terms["PC"] - terms["HC"] - terms["PHC"]
                 - terms["OC"] - terms["SP"] - terms["FK"])
        assert reward == pytest.approx(total, rel=1e-9, abs=1e-12)


def test_scaled_action_space_and_mapping():
    with make_env(scaled=True) as env:
        assert np.all(env.action_space.low == -1.0)
        assert np.all(env.action_space.high == 1.0)
        env.reset()
        n = int(env.hello["action_dim"])
        bounds = [e["bound"] for e in env.hello["action_edges"]]
        _, _, _, _, info = env.step([1.0] * n)
        filled = info["filled"]
        first_edge = env.hello["action_edges"][0]["id"]
        # +1 maps to the published bound (the raw source always fills)
        assert filled[first_edge] == pytest.approx(bounds[0])


def test_wrong_action_length_surfaces_engine_error():
    with make_env() as env:
        env.reset()
        with pytest.raises(EngineError, match="length"):
            env.step([1.0])


def test_bad_scenario_id_fails_fast():
    with pytest.raises(Exception):
        env = InventoryWireEnv(AdapterConfig(
            scenario="not-a-scenario", seed=0, command=SERVE))
        env.reset()


def test_step_before_reset_rejected():
    with make_env() as env:
        with pytest.raises(EngineError, match="reset"):
            env.step([0.0] * int(env.hello["action_dim"]))
