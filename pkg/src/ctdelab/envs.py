"""Built-in environments, all backed by a :class:`DecPomdpModel`.

Matrix games, Dec-Tiger and a small grid-capture task are constructed as tabular
models; :class:`EnvInstance` wraps any model in a reset/step interface whose
dynamics are :func:`sample_step` on the same tables.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core.model import DecPomdpModel, _draw, joint_table, sample_step
from .errors import LifecycleError, SpecError

M1_PAYOFF = [[3.0, 1.0], [1.0, 2.0]]
M2_PAYOFF = [[8.0, -12.0], [-12.0, 0.0]]


@dataclass
class MatrixGameSpec:
    payoff: object
    repeats: int = 1
    discount: float = 1.0


def make_matrix_game(spec: MatrixGameSpec, name: str = "matrix") -> DecPomdpModel:
    """Single-state game repeated ``spec.repeats`` times; agents see one blank observation.

    ``payoff`` is an n-dimensional table indexed by ``[a_1, ..., a_n]`` (two agents
    for the usual matrix game).
    """
    try:
        payoff = np.asarray(spec.payoff, dtype=np.float64)
    except (ValueError, TypeError):
        raise SpecError("payoff table is ragged or non-numeric") from None
    if payoff.ndim < 1 or payoff.size == 0 or not np.all(np.isfinite(payoff)):
        raise SpecError("payoff table must be complete and finite")
    if spec.repeats < 1:
        raise SpecError("repeats must be >= 1")
    n_actions = payoff.shape
    table = joint_table(n_actions)
    # payoff is indexed [a_1, a_2, ...]; reward rows follow mixed-radix joint indices
    reward = payoff[tuple(table.T)][None, :]
    ja = table.shape[0]
    return DecPomdpModel(
        n_actions=n_actions,
        n_observations=(1,) * len(n_actions),
        transition=np.ones((1, ja, 1)),
        reward=reward,
        observation=np.ones((ja, 1, 1)),
        initial_belief=np.ones(1),
        horizon=spec.repeats,
        discount=spec.discount,
        name=name,
    )


# Dec-Tiger ----------------------------------------------------------------

TIGER_LEFT, TIGER_RIGHT = 0, 1
OPEN_LEFT, OPEN_RIGHT, LISTEN = 0, 1, 2
HEAR_LEFT, HEAR_RIGHT = 0, 1


@dataclass
class DecTigerSpec:
    listen_accuracy: float = 0.85
    listen_cost: float = -2.0
    both_open_correct: float = 20.0
    open_wrong: float = -100.0
    mixed_open: float = -50.0
    horizon: int = 3
    discount: float = 1.0
    n_agents: int = 2


def dec_tiger_reward(spec: DecTigerSpec, state: int, joint_action) -> float:
    """Listening costs ``listen_cost`` per listener; door outcome on top of that.

    Any opened tiger door gives ``open_wrong``; every agent opening the safe door
    gives ``both_open_correct``; some (not all) agents opening only the safe door
    gives ``mixed_open``.
    """
    safe = OPEN_RIGHT if state == TIGER_LEFT else OPEN_LEFT
    listeners = sum(a == LISTEN for a in joint_action)
    r = spec.listen_cost * listeners
    opened = [a for a in joint_action if a != LISTEN]
    if not opened:
        return r
    if any(a != safe for a in opened):
        return r + spec.open_wrong
    if len(opened) == len(joint_action):
        return r + spec.both_open_correct
    return r + spec.mixed_open


def make_dec_tiger(spec: DecTigerSpec | None = None) -> DecPomdpModel:
    spec = DecTigerSpec() if spec is None else spec
    if not 0.5 <= spec.listen_accuracy <= 1.0:
        raise SpecError("listen accuracy must lie in [0.5, 1]")
    if spec.horizon < 1 or spec.n_agents < 1:
        raise SpecError("horizon and agent count must be positive")
    n = spec.n_agents
    n_actions, n_obs = (3,) * n, (2,) * n
    acts, obs = joint_table(n_actions), joint_table(n_obs)
    ja, jo = len(acts), len(obs)
    T = np.zeros((2, ja, 2))
    R = np.zeros((2, ja))
    O = np.zeros((ja, 2, jo))
    p = spec.listen_accuracy
    for j, joint in enumerate(acts):
        all_listen = all(a == LISTEN for a in joint)
        for s in (TIGER_LEFT, TIGER_RIGHT):
            R[s, j] = dec_tiger_reward(spec, s, joint)
            if all_listen:
                T[s, j, s] = 1.0
            else:
                T[s, j, :] = 0.5
        for s2 in (TIGER_LEFT, TIGER_RIGHT):
            for k, joint_o in enumerate(obs):
                if all_listen:
                    correct = HEAR_LEFT if s2 == TIGER_LEFT else HEAR_RIGHT
                    O[j, s2, k] = math.prod(p if o == correct else 1.0 - p for o in joint_o)
                else:
                    O[j, s2, k] = 0.5 ** n
    return DecPomdpModel(n_actions, n_obs, T, R, O, np.array([0.5, 0.5]),
                         horizon=spec.horizon, discount=spec.discount, name="dec-tiger",
                         state_labels=("tiger-left", "tiger-right"))


# grid capture ---------------------------------------------------------------

GRID_STATE_BUDGET = 100_000
GRID_TABLE_BUDGET = 50_000_000
MOVES = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))   # stay, up, down, left, right


def make_grid_capture(width: int, height: int, n_agents: int, obs_radius: int = 0,
                      horizon: int = 3, discount: float = 1.0) -> DecPomdpModel:
    """Agents move on a grid; reward 1 whenever every agent ends a move on the target.

    The target is the last cell ``(width-1, height-1)``.  Agent ``i`` only observes
    the offset of the target inside its Chebyshev ``obs_radius`` window (after
    moving), or a "target not visible" symbol.  Agents start uniformly off-target.
    """
    if min(width, height, n_agents, horizon) < 1 or obs_radius < 0:
        raise SpecError("grid dimensions, agents and horizon must be positive")
    cells = width * height
    n_states = cells ** n_agents
    if n_states > GRID_STATE_BUDGET:
        raise SpecError(f"{n_states} joint states exceed budget {GRID_STATE_BUDGET}")
    n_actions = (len(MOVES),) * n_agents
    side = 2 * obs_radius + 1
    n_obs_i = side * side + 1
    n_obs = (n_obs_i,) * n_agents
    acts = joint_table(n_actions)
    ja, jo = len(acts), n_obs_i ** n_agents
    if n_states * ja * max(n_states, jo) > GRID_TABLE_BUDGET:
        raise SpecError("grid too large for dense tables")
    target = cells - 1
    tx, ty = target % width, target // width

    positions = list(itertools.product(range(cells), repeat=n_agents))   # agent 0 most significant here
    index = {pos: k for k, pos in enumerate(positions)}

    def move(cell, a):
        x, y = cell % width, cell // width
        dx, dy = MOVES[a]
        x = min(max(x + dx, 0), width - 1)
        y = min(max(y + dy, 0), height - 1)
        return y * width + x

    def observe(cell):
        x, y = cell % width, cell // width
        dx, dy = tx - x, ty - y
        if max(abs(dx), abs(dy)) > obs_radius:
            return side * side
        return (dy + obs_radius) * side + (dx + obs_radius)

    obs_radix = np.cumprod((1,) + n_obs[:-1])
    T = np.zeros((n_states, ja, n_states))
    R = np.zeros((n_states, ja))
    O = np.zeros((ja, n_states, jo))
    state_obs = np.array([sum(observe(c) * r for c, r in zip(pos, obs_radix)) for pos in positions])
    for s, pos in enumerate(positions):
        for j, joint in enumerate(acts):
            nxt = tuple(move(c, a) for c, a in zip(pos, joint))
            s2 = index[nxt]
            T[s, j, s2] = 1.0
            R[s, j] = 1.0 if all(c == target for c in nxt) else 0.0
    O[:, np.arange(n_states), state_obs] = 1.0
    start = np.array([0.0 if any(c == target for c in pos) else 1.0 for pos in positions])
    if start.sum() == 0:
        start[:] = 1.0
    return DecPomdpModel(n_actions, n_obs, T, R, O, start / start.sum(), horizon=horizon,
                         discount=discount, name=f"grid-{width}x{height}-n{n_agents}-r{obs_radius}")


# reset/step wrapper ----------------------------------------------------------

@dataclass
class EnvInstance:
    model: DecPomdpModel
    rng: np.random.Generator
    state: int = -1
    timestep: int = 0
    episode_return: float = 0.0
    done: bool = True
    log: list = field(default_factory=list, repr=False)

    def reset(self) -> list[int]:
        self.state = _draw(self.model.initial_belief, self.rng.random())
        self.timestep = 0
        self.episode_return = 0.0
        self.done = False
        self.log = [("reset", self.state)]
        # empty initial history: agents start with no observation
        return [None] * self.model.n_agents

    def step(self, joint_action) -> tuple[list[int], float, bool]:
        if self.done:
            raise LifecycleError("step called on a finished episode; call reset() first")
        prev = self.state
        self.state, obs, reward = sample_step(self.model, self.state, joint_action, self.rng)
        self.timestep += 1
        self.episode_return += reward * self.model.discount ** (self.timestep - 1)
        horizon = self.model.horizon
        self.done = horizon is not None and self.timestep >= horizon
        self.log.append((prev, tuple(joint_action), self.state, obs, reward))
        return list(obs), reward, self.done


def reset(env: EnvInstance):
    return env.reset()


def env_step(env: EnvInstance, joint_action):
    return env.step(joint_action)


def _tiger(**kw):
    return make_dec_tiger(DecTigerSpec(**kw))


REGISTRY: dict[str, Callable[..., DecPomdpModel]] = {
    "m1": lambda **kw: make_matrix_game(MatrixGameSpec(M1_PAYOFF, **kw), name="m1"),
    "m2": lambda **kw: make_matrix_game(MatrixGameSpec(M2_PAYOFF, **kw), name="m2"),
    "zero": lambda **kw: make_matrix_game(MatrixGameSpec([[0.0, 0.0], [0.0, 0.0]], **kw), name="zero"),
    "bandit": lambda **kw: make_matrix_game(MatrixGameSpec([1.0, 0.0], **kw), name="bandit"),
    "dec-tiger": _tiger,
    "grid-capture": lambda **kw: make_grid_capture(**{"width": 2, "height": 2, "n_agents": 2, **kw}),
}

DESCRIPTIONS = {
    "m1": "one-shot 2-agent matrix game, payoff [[3,1],[1,2]]",
    "m2": "one-shot nonmonotonic matrix game, payoff [[8,-12],[-12,0]]",
    "zero": "2-agent matrix game with all-zero payoff",
    "bandit": "single-agent one-state bandit, reward 1 for action 0",
    "dec-tiger": "two-agent Dec-Tiger (listen accuracy 0.85, horizon 3 by default)",
    "grid-capture": "agents must meet on the target cell of a small grid",
}


def make_env(name: str, **params) -> DecPomdpModel:
    from .core.model_io import load_model
    if name in REGISTRY:
        return REGISTRY[name](**params)
    if Path(name).is_file():
        return load_model(name)
    raise SpecError(f"unknown environment {name!r}")
