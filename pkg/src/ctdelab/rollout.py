"""Lockstep simulation of many episodes of a tabular model.

Each step consumes one uniform per episode for the next state and one for the
joint observation, the same draws ``sample_step`` makes for a single episode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core.model import DecPomdpModel
from .errors import ConfigError


def episode_length(model: DecPomdpModel, max_steps: int | None = None) -> int:
    if model.horizon is not None:
        return model.horizon if max_steps is None else min(model.horizon, max_steps)
    if max_steps is None:
        raise ConfigError("infinite-horizon model needs max_steps", field="max_steps")
    return max_steps


def _draw_rows(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


@dataclass
class EpisodeBatch:
    """``B`` episodes of equal length ``L``; ``states`` has one extra column (final state)."""

    actions: np.ndarray       # (B, L, n) int
    observations: np.ndarray  # (B, L, n) int, received after the action at the same step
    rewards: np.ndarray       # (B, L)
    states: np.ndarray        # (B, L + 1) int
    terminal: np.ndarray      # (B, L) bool, True where no bootstrap follows

    @property
    def size(self) -> int:
        return self.actions.shape[0]

    @property
    def length(self) -> int:
        return self.actions.shape[1]

    def select(self, rows) -> "EpisodeBatch":
        return EpisodeBatch(self.actions[rows], self.observations[rows], self.rewards[rows],
                            self.states[rows], self.terminal[rows])


class VectorEnv:
    """``n_envs`` copies of a model advanced together."""

    def __init__(self, model: DecPomdpModel, n_envs: int, rng: np.random.Generator):
        self.model, self.n_envs, self.rng = model, n_envs, rng
        self._t_cdf = np.cumsum(model.transition, axis=-1)
        self._o_cdf = np.cumsum(model.observation, axis=-1)
        self._b_cdf = np.cumsum(model.initial_belief)
        self._radix = np.cumprod((1,) + tuple(model.n_actions[:-1]))
        self._obs_table = model.observation_table
        self.states = np.zeros(n_envs, dtype=np.int64)

    def reset(self) -> np.ndarray:
        u = self.rng.random(self.n_envs)
        self.states = _draw_rows(np.broadcast_to(self._b_cdf, (self.n_envs, len(self._b_cdf))), u)
        return self.states.copy()

    def step(self, actions: np.ndarray):
        """``actions`` (B, n) -> (observations (B, n), rewards (B,), next states (B,))."""
        ja = actions @ self._radix
        rewards = self.model.reward[self.states, ja]
        nxt = _draw_rows(self._t_cdf[self.states, ja], self.rng.random(self.n_envs))
        jo = _draw_rows(self._o_cdf[ja, nxt], self.rng.random(self.n_envs))
        self.states = nxt
        return self._obs_table[jo], rewards, nxt.copy()


ActFn = Callable[[int, "np.ndarray | None", "np.ndarray | None"], np.ndarray]


def collect(model: DecPomdpModel, n_episodes: int, act: ActFn, rng: np.random.Generator,
            max_steps: int | None = None) -> EpisodeBatch:
    """Run ``n_episodes`` episodes; ``act(t, last_obs, last_actions)`` returns (B, n) actions."""
    L = episode_length(model, max_steps)
    env = VectorEnv(model, n_episodes, rng)
    n = model.n_agents
    states = np.zeros((n_episodes, L + 1), dtype=np.int64)
    actions = np.zeros((n_episodes, L, n), dtype=np.int64)
    obs = np.zeros((n_episodes, L, n), dtype=np.int64)
    rewards = np.zeros((n_episodes, L))
    states[:, 0] = env.reset()
    last_obs = last_act = None
    for t in range(L):
        a = np.asarray(act(t, last_obs, last_act), dtype=np.int64)
        o, r, s = env.step(a)
        actions[:, t], obs[:, t], rewards[:, t], states[:, t + 1] = a, o, r, s
        last_obs, last_act = o, a
    terminal = np.zeros((n_episodes, L), dtype=bool)
    # a finite horizon ends the episode; a step cap on an infinite model is a truncation
    terminal[:, -1] = model.horizon is not None and L == model.horizon
    return EpisodeBatch(actions, obs, rewards, states, terminal)


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """``R_t = Σ_{j≥t} γ^{j-t} r_j`` along the last axis."""
    out = np.zeros_like(rewards, dtype=np.float64)
    acc = np.zeros(rewards.shape[:-1])
    for t in range(rewards.shape[-1] - 1, -1, -1):
        acc = rewards[..., t] + gamma * acc
        out[..., t] = acc
    return out
