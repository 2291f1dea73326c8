"""Tabular Dec-POMDP record, joint index encoding, sampling and Bayes filtering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DimensionError, ModelIntegrityError, ZeroProbabilityError

ROW_TOL = 1e-12


def encode_joint(values: Sequence[int], radices: Sequence[int]) -> int:
    """Mixed-radix encoding, agent 0 least significant."""
    if len(values) != len(radices):
        raise DimensionError(f"expected {len(radices)} components, got {len(values)}")
    code = 0
    for v, r in zip(reversed(values), reversed(radices)):
        if not 0 <= v < r:
            raise DimensionError(f"component {v} out of range [0, {r})")
        code = code * r + int(v)
    return code


def decode_joint(code: int, radices: Sequence[int]) -> tuple[int, ...]:
    out = []
    for r in radices:
        out.append(code % r)
        code //= r
    if code:
        raise DimensionError("joint index out of range")
    return tuple(out)


def joint_table(radices: Sequence[int]) -> np.ndarray:
    """Row ``j`` holds the per-agent components of joint index ``j``."""
    total = math.prod(radices)
    table = np.empty((total, len(radices)), dtype=np.int64)
    codes = np.arange(total)
    for i, r in enumerate(radices):
        table[:, i] = codes % r
        codes = codes // r
    return table


def _draw(probs: np.ndarray, u: float) -> int:
    # inverse-cdf draw; the clamp guards against u landing beyond a cumsum of 1 - 1ulp
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


@dataclass
class DecPomdpModel:
    """Finite Dec-POMDP.

    ``transition[s, ja, s2]``, ``reward[s, ja]`` and ``observation[ja, s2, jo]``
    index joint actions and joint observations in mixed radix with agent 0 least
    significant.  ``horizon=None`` means infinite.
    """

    n_actions: tuple[int, ...]
    n_observations: tuple[int, ...]
    transition: np.ndarray
    reward: np.ndarray
    observation: np.ndarray
    initial_belief: np.ndarray
    horizon: int | None = 1
    discount: float = 1.0
    name: str = "model"
    state_labels: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.n_actions = tuple(int(a) for a in self.n_actions)
        self.n_observations = tuple(int(o) for o in self.n_observations)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        self.observation = np.asarray(self.observation, dtype=np.float64)
        self.initial_belief = np.asarray(self.initial_belief, dtype=np.float64)
        self.validate()
        self._action_table = joint_table(self.n_actions)
        self._obs_table = joint_table(self.n_observations)

    @property
    def n_agents(self) -> int:
        return len(self.n_actions)

    @property
    def n_states(self) -> int:
        return self.initial_belief.shape[0]

    @property
    def n_joint_actions(self) -> int:
        return math.prod(self.n_actions)

    @property
    def n_joint_observations(self) -> int:
        return math.prod(self.n_observations)

    def validate(self) -> None:
        if len(self.n_actions) != len(self.n_observations) or not self.n_actions:
            raise DimensionError("need one action and observation count per agent")
        if min(self.n_actions) < 1 or min(self.n_observations) < 1:
            raise DimensionError("action and observation sets must be non-empty")
        k, ja, jo = self.n_states, self.n_joint_actions, self.n_joint_observations
        if self.transition.shape != (k, ja, k):
            raise DimensionError(f"transition shape {self.transition.shape} != {(k, ja, k)}")
        if self.reward.shape != (k, ja):
            raise DimensionError(f"reward shape {self.reward.shape} != {(k, ja)}")
        if self.observation.shape != (ja, k, jo):
            raise DimensionError(f"observation shape {self.observation.shape} != {(ja, k, jo)}")
        for arr, what in ((self.transition, "transition"), (self.observation, "observation")):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ModelIntegrityError(f"{what} table has negative or non-finite entries")
            worst = np.max(np.abs(arr.sum(axis=-1) - 1.0))
            if worst > ROW_TOL:
                raise ModelIntegrityError(f"{what} row off by {worst:.3e}")
        if np.any(self.initial_belief < 0) or abs(self.initial_belief.sum() - 1.0) > ROW_TOL:
            raise ModelIntegrityError("initial belief is not a distribution")
        if not np.all(np.isfinite(self.reward)):
            raise ModelIntegrityError("reward table has non-finite entries")
        if not 0.0 <= self.discount <= 1.0:
            raise ModelIntegrityError("discount must lie in [0, 1]")
        if self.horizon is None:
            if self.discount >= 1.0:
                raise ModelIntegrityError("infinite horizon requires discount < 1")
        elif int(self.horizon) < 1:
            raise ModelIntegrityError("horizon must be positive")

    def joint_action_index(self, joint_action: Sequence[int]) -> int:
        return encode_joint(joint_action, self.n_actions)

    def joint_action(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.n_joint_actions:
            raise DimensionError(f"joint action {index} out of range")
        return tuple(int(x) for x in self._action_table[index])

    def joint_observation_index(self, joint_obs: Sequence[int]) -> int:
        return encode_joint(joint_obs, self.n_observations)

    def joint_observation(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.n_joint_observations:
            raise DimensionError(f"joint observation {index} out of range")
        return tuple(int(x) for x in self._obs_table[index])

    @property
    def action_table(self) -> np.ndarray:
        return self._action_table

    @property
    def observation_table(self) -> np.ndarray:
        return self._obs_table

    def _ja(self, joint_action) -> int:
        if isinstance(joint_action, (int, np.integer)):
            if not 0 <= joint_action < self.n_joint_actions:
                raise DimensionError(f"joint action {joint_action} out of range")
            return int(joint_action)
        return self.joint_action_index(joint_action)


def sample_step(model: DecPomdpModel, state: int, joint_action, rng: np.random.Generator):
    """One environment transition: ``(next_state, joint_observation, reward)``.

    Uses exactly two uniforms from ``rng`` (next state, then joint observation), so
    any caller consuming the same stream reproduces the same trajectory.
    """
    if not 0 <= state < model.n_states:
        raise DimensionError(f"state {state} out of range")
    ja = model._ja(joint_action)
    t_row = model.transition[state, ja]
    if abs(t_row.sum() - 1.0) > ROW_TOL:
        raise ModelIntegrityError(f"transition row ({state}, {ja}) not normalized")
    next_state = _draw(t_row, rng.random())
    o_row = model.observation[ja, next_state]
    if abs(o_row.sum() - 1.0) > ROW_TOL:
        raise ModelIntegrityError(f"observation row ({ja}, {next_state}) not normalized")
    jo = _draw(o_row, rng.random())
    return next_state, model.joint_observation(jo), float(model.reward[state, ja])


def belief_filter(model: DecPomdpModel, belief, joint_action, joint_observation) -> np.ndarray:
    """Bayes update ``b'(s') ∝ O(a, s', o) Σ_s T(s, a, s') b(s)``."""
    belief = np.asarray(belief, dtype=np.float64)
    if belief.shape != (model.n_states,):
        raise DimensionError("belief has wrong length")
    ja = model._ja(joint_action)
    jo = (joint_observation if isinstance(joint_observation, (int, np.integer))
          else model.joint_observation_index(joint_observation))
    unnorm = model.observation[ja, :, jo] * (belief @ model.transition[:, ja, :])
    z = unnorm.sum()
    if z <= 0.0:
        raise ZeroProbabilityError(f"observation {jo} impossible after action {ja}")
    return unnorm / z


def restrict_actions(model: DecPomdpModel, allowed: Sequence[Sequence[int]]) -> DecPomdpModel:
    """Sub-model in which agent ``i`` may only use ``allowed[i]`` (re-indexed from 0)."""
    if len(allowed) != model.n_agents:
        raise DimensionError("need an allowed-action list per agent")
    sizes = tuple(len(a) for a in allowed)
    sub = joint_table(sizes)
    keep = [model.joint_action_index([allowed[i][c] for i, c in enumerate(row)]) for row in sub]
    return DecPomdpModel(
        n_actions=sizes,
        n_observations=model.n_observations,
        transition=model.transition[:, keep, :],
        reward=model.reward[:, keep],
        observation=model.observation[keep],
        initial_belief=model.initial_belief,
        horizon=model.horizon,
        discount=model.discount,
        name=f"{model.name}-restricted",
    )
