from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..rollout import EpisodeBatch


class EpisodeBuffer:
    """Ring buffer of whole fixed-length episodes.

    ``truncate`` (optional) makes ``sample`` return random windows of that many
    steps whose recurrent state restarts at the window start; this is cheaper but
    biased, since the agents no longer see the full history.
    """

    def __init__(self, capacity: int, length: int, n_agents: int, truncate: int | None = None):
        if capacity < 1:
            raise ConfigError("buffer capacity must be positive", field="capacity")
        if truncate is not None and not 1 <= truncate <= length:
            raise ConfigError("truncate must lie in [1, episode length]", field="truncate")
        self.capacity, self.length, self.truncate = capacity, length, truncate
        self.actions = np.zeros((capacity, length, n_agents), dtype=np.int64)
        self.observations = np.zeros((capacity, length, n_agents), dtype=np.int64)
        self.rewards = np.zeros((capacity, length))
        self.states = np.zeros((capacity, length + 1), dtype=np.int64)
        self.terminal = np.zeros((capacity, length), dtype=bool)
        self.count = 0
        self.cursor = 0

    def __len__(self):
        return self.count

    def add(self, batch: EpisodeBatch) -> None:
        for b in range(batch.size):
            k = self.cursor
            self.actions[k] = batch.actions[b]
            self.observations[k] = batch.observations[b]
            self.rewards[k] = batch.rewards[b]
            self.states[k] = batch.states[b]
            self.terminal[k] = batch.terminal[b]
            self.cursor = (k + 1) % self.capacity
            self.count = min(self.count + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> EpisodeBatch:
        if self.count == 0:
            raise ConfigError("cannot sample from an empty buffer", field="batch_episodes")
        rows = rng.integers(self.count, size=n)
        batch = EpisodeBatch(self.actions[rows], self.observations[rows], self.rewards[rows],
                             self.states[rows], self.terminal[rows])
        if self.truncate is None or self.truncate == self.length:
            return batch
        start = int(rng.integers(self.length - self.truncate + 1))
        w = slice(start, start + self.truncate)
        return EpisodeBatch(batch.actions[:, w], batch.observations[:, w], batch.rewards[:, w],
                            batch.states[:, start:start + self.truncate + 1], batch.terminal[:, w])
