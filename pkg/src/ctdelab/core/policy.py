"""Local/joint histories and deterministic/stochastic joint policies."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import DimensionError

PROB_TOL = 1e-9


@dataclass(frozen=True)
class LocalHistory:
    agent_id: int
    entries: tuple[tuple[int, int], ...] = ()

    def __len__(self):
        return len(self.entries)

    def extend(self, action: int, observation: int) -> "LocalHistory":
        return LocalHistory(self.agent_id, self.entries + ((int(action), int(observation)),))

    @property
    def observations(self) -> tuple[int, ...]:
        return tuple(o for _, o in self.entries)

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.entries)


@dataclass(frozen=True)
class JointHistory:
    locals: tuple[LocalHistory, ...]

    def __post_init__(self):
        if len({len(h) for h in self.locals}) > 1:
            raise DimensionError("local histories in a joint history must have equal length")

    @classmethod
    def empty(cls, n_agents: int) -> "JointHistory":
        return cls(tuple(LocalHistory(i) for i in range(n_agents)))

    @classmethod
    def from_steps(cls, steps: Sequence[tuple[Sequence[int], Sequence[int]]], n_agents: int):
        jh = cls.empty(n_agents)
        for ja, jo in steps:
            jh = jh.extend(ja, jo)
        return jh

    def __len__(self):
        return len(self.locals[0]) if self.locals else 0

    def extend(self, joint_action: Sequence[int], joint_observation: Sequence[int]) -> "JointHistory":
        return JointHistory(tuple(h.extend(a, o) for h, a, o
                                  in zip(self.locals, joint_action, joint_observation)))

    def steps(self):
        """Yield ``(joint_action, joint_observation)`` pairs in order."""
        for t in range(len(self)):
            yield (tuple(h.entries[t][0] for h in self.locals),
                   tuple(h.entries[t][1] for h in self.locals))


class JointPolicy:
    """Anything that can give ``π_i(·|h_i)`` for each agent."""

    n_actions: tuple[int, ...]

    def probs(self, agent: int, history: LocalHistory) -> np.ndarray:
        raise NotImplementedError

    def joint_action_probs(self, jh: JointHistory) -> list[tuple[tuple[int, ...], float]]:
        """Joint actions with non-zero probability, in lexicographic order."""
        per_agent = []
        for i, h in enumerate(jh.locals):
            p = self.probs(i, h)
            per_agent.append([(a, float(p[a])) for a in range(len(p)) if p[a] > 0.0])
        out = []
        for combo in itertools.product(*per_agent):
            prob = 1.0
            for _, p in combo:
                prob *= p
            out.append((tuple(a for a, _ in combo), prob))
        return out


def observation_sequences(n_obs: int, horizon: int) -> list[tuple[int, ...]]:
    """All observation sequences of length 0..horizon-1, ordered by length then lexicographically."""
    seqs: list[tuple[int, ...]] = []
    for length in range(horizon):
        seqs.extend(itertools.product(range(n_obs), repeat=length))
    return seqs


@dataclass
class JointDeterministicPolicy(JointPolicy):
    """Per-agent tables keyed by observation sequences (actions are implied)."""

    n_actions: tuple[int, ...]
    tables: tuple[Mapping[tuple[int, ...], int], ...]

    def __post_init__(self):
        self.n_actions = tuple(self.n_actions)
        for i, table in enumerate(self.tables):
            for key, a in table.items():
                if not 0 <= a < self.n_actions[i]:
                    raise DimensionError(f"agent {i}: action {a} invalid at {key}")

    def action(self, agent: int, history: LocalHistory) -> int:
        return self.tables[agent][history.observations]

    def joint_action(self, jh: JointHistory) -> tuple[int, ...]:
        return tuple(self.action(i, h) for i, h in enumerate(jh.locals))

    def probs(self, agent, history):
        p = np.zeros(self.n_actions[agent])
        p[self.action(agent, history)] = 1.0
        return p

    def joint_action_probs(self, jh):
        return [(self.joint_action(jh), 1.0)]

    @classmethod
    def constant(cls, n_actions, n_observations, horizon, joint_action):
        tables = tuple({seq: joint_action[i] for seq in observation_sequences(n_observations[i], horizon)}
                       for i in range(len(n_actions)))
        return cls(tuple(n_actions), tables)

    @classmethod
    def from_function(cls, n_actions, n_observations, horizon, fn: Callable[[int, tuple], int]):
        """Tabulate ``fn(agent, observation_sequence) -> action`` over all decision points."""
        tables = tuple({seq: int(fn(i, seq)) for seq in observation_sequences(n_observations[i], horizon)}
                       for i in range(len(n_actions)))
        return cls(tuple(n_actions), tables)


class JointStochasticPolicy(JointPolicy):
    """Per-agent maps from action-observation histories to action distributions.

    Each element of ``maps`` is either a callable ``LocalHistory -> probs`` or a
    mapping keyed by the history's ``entries`` tuple.
    """

    def __init__(self, n_actions: Sequence[int], maps: Sequence):
        self.n_actions = tuple(n_actions)
        if len(maps) != len(self.n_actions):
            raise DimensionError("need one map per agent")
        self.maps = tuple(maps)
        self._cache: dict[tuple[int, LocalHistory], np.ndarray] = {}

    def probs(self, agent, history):
        key = (agent, history)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = self.maps[agent]
        p = np.asarray(m(history) if callable(m) else m[history.entries], dtype=np.float64)
        if p.shape != (self.n_actions[agent],):
            raise DimensionError(f"agent {agent}: distribution has shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise DimensionError(f"agent {agent}: not a distribution at {history.entries}")
        self._cache[key] = p
        return p

    @classmethod
    def uniform(cls, n_actions):
        return cls(n_actions, [(lambda h, k=k: np.full(k, 1.0 / k)) for k in n_actions])

    @classmethod
    def random(cls, n_actions, n_observations, horizon, rng: np.random.Generator, concentration=1.0):
        """Dirichlet-random distribution at every action-observation history."""
        maps = []
        for k, m in zip(n_actions, n_observations):
            table = {}
            for entries in action_observation_histories(k, m, horizon):
                table[entries] = rng.dirichlet(np.full(k, concentration))
            maps.append(table)
        return cls(n_actions, maps)


def action_observation_histories(n_actions: int, n_obs: int, horizon: int):
    """All local ``entries`` tuples of length 0..horizon-1."""
    pairs = [(a, o) for a in range(n_actions) for o in range(n_obs)]
    out = []
    for length in range(horizon):
        out.extend(itertools.product(pairs, repeat=length))
    return out
