"""Agents that drive :class:`~towerbench.env.TowerEnv` episodes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import DecisionStep, TowerEnv
from .nn import Mlp
from .ppo import load_checkpoint, masked_softmax, sample_action
from .strategies import N_ACTIONS, hai_select


class Agent:
    name = "agent"

    def begin_episode(self, seed: int) -> None:
        """Called before each episode with that episode's seed."""

    def act(self, step: DecisionStep, env: TowerEnv) -> int:
        raise NotImplementedError


class HaiAgent(Agent):
    """Static priority calculator plus the scripted strategies."""

    name = "hai"

    def act(self, step: DecisionStep, env: TowerEnv) -> int:
        return hai_select(env.state)


class RandomAgent(Agent):
    """Uniform over mask-true actions, reseeded from the episode seed."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def begin_episode(self, seed: int) -> None:
        self.rng = np.random.default_rng([self.seed, seed])

    def act(self, step: DecisionStep, env: TowerEnv) -> int:
        allowed = np.flatnonzero(step.mask)
        return int(allowed[self.rng.integers(len(allowed))])


class HrlAgent(Agent):
    """Trained actor choosing which strategy runs; argmax unless stochastic."""

    name = "hrl"

    def __init__(self, actor: Mlp, stochastic: bool = False, seed: int = 0):
        if actor.sizes[-1] != N_ACTIONS:
            raise ValueError(f"actor has {actor.sizes[-1]} outputs, expected {N_ACTIONS}")
        self.actor = actor
        self.stochastic = stochastic
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    @classmethod
    def from_checkpoint(cls, path, stochastic: bool = False, seed: int = 0) -> "HrlAgent":
        actor, _, _ = load_checkpoint(path)
        return cls(actor, stochastic, seed)

    def begin_episode(self, seed: int) -> None:
        self.rng = np.random.default_rng([self.seed, seed])

    def act(self, step: DecisionStep, env: TowerEnv) -> int:
        probs = masked_softmax(self.actor.forward_one(step.observation), step.mask)
        if self.stochastic:
            return sample_action(probs, self.rng.random())
        return int(np.argmax(np.where(step.mask, probs, -1.0)))


@dataclass
class EpisodeRecord:
    level: str
    difficulty: int
    seed: int
    won: bool
    reward: float
    steps: int
    actions: np.ndarray  # counts per action index
    kills: int = 0
    advanced: int = 0
    ticks: int = 0


def run_episode(agent: Agent, level, difficulty: int, seed: int, env: Optional[TowerEnv] = None,
                trace_path=None) -> EpisodeRecord:
    """Play one episode to termination. Steps count agent decisions."""
    env = env or TowerEnv(trace=trace_path is not None)
    agent.begin_episode(seed)
    step = env.reset(level, difficulty, seed)
    reward = step.reward_prev
    counts = np.zeros(N_ACTIONS, dtype=np.int64)
    steps = 0
    while not step.terminal:
        a = agent.act(step, env)
        counts[a] += 1
        step = env.step(a)
        reward += step.reward_prev
        steps += 1
    if trace_path is not None:
        env.write_trace(trace_path)
    return EpisodeRecord(level.id, difficulty, seed, bool(env.won), float(reward), steps, counts,
                         env.kills, env.advanced, env.state.tick)


def make_agent(kind: str, model=None, seed: int = 0, stochastic: bool = False) -> Agent:
    kind = kind.lower()
    if kind == "hai":
        return HaiAgent()
    if kind == "random":
        return RandomAgent(seed)
    if kind == "hrl":
        if model is None:
            raise ValueError("hrl agent needs a model checkpoint")
        if isinstance(model, Mlp):
            return HrlAgent(model, stochastic, seed)
        return HrlAgent.from_checkpoint(model, stochastic, seed)
    raise ValueError(f"unknown agent kind {kind!r} (expected hrl, hai or random)")
