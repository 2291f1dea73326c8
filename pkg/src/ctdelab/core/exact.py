"""Exact finite-horizon evaluation, brute-force optimal search, policy counting and
vectorized Monte-Carlo estimation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import EnumerationBudgetError, UnsupportedError, ZeroProbabilityError
from .model import DecPomdpModel, encode_joint
from .policy import (JointDeterministicPolicy, JointHistory, JointPolicy, LocalHistory,
                     action_observation_histories, observation_sequences)

DEFAULT_BUDGET = 10_000_000


def _require_finite(model: DecPomdpModel) -> int:
    if model.horizon is None:
        raise UnsupportedError("exact evaluation needs a finite horizon; use Monte Carlo instead")
    return int(model.horizon)


def history_belief(model: DecPomdpModel, jh: JointHistory) -> np.ndarray:
    """``P(s | h, b0)``; raises if the history has zero probability."""
    b = model.initial_belief
    for ja, jo in jh.steps():
        a = model.joint_action_index(ja)
        o = model.joint_observation_index(jo)
        unnorm = model.observation[a, :, o] * (b @ model.transition[:, a, :])
        z = unnorm.sum()
        if z <= 0.0:
            raise ZeroProbabilityError("start history has zero probability under b0")
        b = unnorm / z
    return b


class _Recursion:
    def __init__(self, model: DecPomdpModel, policy: JointPolicy):
        self.model = model
        self.policy = policy
        self.H = _require_finite(model)
        self.v_cache: dict[JointHistory, float] = {}

    def value(self, jh: JointHistory, belief: np.ndarray) -> float:
        if len(jh) >= self.H:
            return 0.0
        hit = self.v_cache.get(jh)
        if hit is not None:
            return hit
        total = 0.0
        for ja, p in self.policy.joint_action_probs(jh):
            total += p * self.q(jh, belief, ja)
        self.v_cache[jh] = total
        return total

    def q(self, jh: JointHistory, belief: np.ndarray, joint_action) -> float:
        m = self.model
        if len(jh) >= self.H:
            return 0.0
        a = m.joint_action_index(joint_action)
        immediate = float(belief @ m.reward[:, a])
        if len(jh) + 1 >= self.H or m.discount == 0.0:
            return immediate
        pred = belief @ m.transition[:, a, :]
        joint = pred[:, None] * m.observation[a]          # (s', jo)
        p_obs = joint.sum(axis=0)
        future = 0.0
        for o in np.flatnonzero(p_obs > 0.0):
            nb = joint[:, o] / p_obs[o]
            child = jh.extend(joint_action, m.joint_observation(int(o)))
            future += p_obs[o] * self.value(child, nb)
        return immediate + m.discount * future


def exact_policy_value(model: DecPomdpModel, policy: JointPolicy, start: JointHistory | None = None) -> float:
    """``V^π(h)`` by full expansion over states, next states and joint observations."""
    _require_finite(model)
    start = JointHistory.empty(model.n_agents) if start is None else start
    rec = _Recursion(model, policy)
    return rec.value(start, history_belief(model, start))


def exact_q_value(model: DecPomdpModel, policy: JointPolicy, history: JointHistory | None, joint_action) -> float:
    """``Q^π(h, a)``: take ``joint_action`` at ``history`` then follow ``policy``."""
    _require_finite(model)
    history = JointHistory.empty(model.n_agents) if history is None else history
    rec = _Recursion(model, policy)
    return rec.q(history, history_belief(model, history), tuple(joint_action))


def reachable_histories(model: DecPomdpModel, policy: JointPolicy, max_len: int | None = None):
    """Joint histories of length < ``max_len`` with positive probability under ``policy``."""
    H = _require_finite(model) if max_len is None else max_len
    out = []
    frontier = [(JointHistory.empty(model.n_agents), model.initial_belief)]
    while frontier:
        jh, b = frontier.pop(0)
        if len(jh) >= H:
            continue
        out.append(jh)
        for ja, _ in policy.joint_action_probs(jh):
            a = model.joint_action_index(ja)
            joint = (b @ model.transition[:, a, :])[:, None] * model.observation[a]
            p_obs = joint.sum(axis=0)
            for o in np.flatnonzero(p_obs > 0.0):
                frontier.append((jh.extend(ja, model.joint_observation(int(o))), joint[:, o] / p_obs[o]))
    return out


# ---------------------------------------------------------------------------
# policy counting

def count_policies(actions: int, observations: int, horizon: int, n_agents: int) -> tuple[int, int]:
    """Exact ``(per_agent, joint)`` deterministic policy counts.

    Decision points are observation sequences of length 0..H-1, so an agent has
    ``a ** ((o**H - 1) / (o - 1))`` policies (``a ** H`` when ``o == 1``).
    """
    if min(actions, observations, horizon, n_agents) < 1:
        raise ValueError("all arguments must be >= 1")
    points = horizon if observations == 1 else (observations ** horizon - 1) // (observations - 1)
    per_agent = actions ** points
    return per_agent, per_agent ** n_agents


def joint_policy_count(model: DecPomdpModel) -> int:
    H = _require_finite(model)
    total = 1
    for a, o in zip(model.n_actions, model.n_observations):
        total *= count_policies(a, o, H, 1)[0]
    return total


# ---------------------------------------------------------------------------
# brute force

@dataclass
class OptimalResult:
    policy: JointDeterministicPolicy
    value: float
    evaluated: int


def _agent_policies(n_actions: int, seqs):
    for combo in itertools.product(range(n_actions), repeat=len(seqs)):
        yield dict(zip(seqs, combo))


def _best_response(model: DecPomdpModel, others: list[dict], H: int):
    """Exact best response of the last agent to fixed deterministic policies of the others.

    Works over the last agent's observation histories carrying unnormalized joint
    weights over (state, other agents' observation histories); returns
    ``(value, table)`` with lowest-action tie-breaking.
    """
    m = model
    n = m.n_agents
    last_a, last_o = m.n_actions[-1], m.n_observations[-1]
    gamma = m.discount
    obs_rows = m.observation_table
    seqs = observation_sequences(last_o, H)

    def fill_default(prefix, table):
        for seq in seqs:
            if seq[:len(prefix)] == prefix and seq not in table:
                table[seq] = 0

    def solve(prefix: tuple, weights: dict):
        t = len(prefix)
        best_v, best_tab = -math.inf, None
        for a_last in range(last_a):
            total = 0.0
            children: list[dict] = [dict() for _ in range(last_o)]
            for oh, w in weights.items():
                acts = [others[j][oh[j]] for j in range(n - 1)]
                ja = encode_joint(acts + [a_last], m.n_actions)
                total += float(w @ m.reward[:, ja])
                if t + 1 < H and gamma != 0.0:
                    joint = (w @ m.transition[:, ja, :])[:, None] * m.observation[ja]
                    p = joint.sum(axis=0)
                    for jo in np.flatnonzero(p > 0.0):
                        obs = obs_rows[jo]
                        key = tuple(oh[j] + (int(obs[j]),) for j in range(n - 1))
                        child = children[int(obs[-1])]
                        if key in child:
                            child[key] = child[key] + joint[:, jo]
                        else:
                            child[key] = joint[:, jo]
            table = {prefix: a_last}
            if t + 1 < H:
                for o_last in range(last_o):
                    child_prefix = prefix + (o_last,)
                    if children[o_last]:
                        v, sub = solve(child_prefix, children[o_last])
                        total += gamma * v
                        table.update(sub)
                    else:
                        fill_default(child_prefix, table)
            if total > best_v:
                best_v, best_tab = total, table
        return best_v, best_tab

    start_key = tuple(() for _ in range(n - 1))
    value, table = solve((), {start_key: m.initial_belief.copy()})
    return value, table


def brute_force_optimal(model: DecPomdpModel, budget: int = DEFAULT_BUDGET,
                        method: str = "best-response") -> OptimalResult:
    """Optimal joint deterministic policy from the empty history.

    ``method="exhaustive"`` evaluates every joint policy with the exact recursion.
    ``method="best-response"`` (default) enumerates every policy of agents
    0..n-2 and solves the last agent exactly by backward induction over its
    observation histories, which is the same maximum over the same space.
    Ties go to the lowest enumeration index.
    """
    H = _require_finite(model)
    total = joint_policy_count(model)
    if total > budget:
        raise EnumerationBudgetError(f"{total} joint policies exceed budget {budget}")
    seqs = [observation_sequences(o, H) for o in model.n_observations]
    n = model.n_agents

    best_v, best_tables, evaluated = -math.inf, None, 0
    if method == "exhaustive":
        spaces = [list(_agent_policies(a, s)) for a, s in zip(model.n_actions, seqs)]
        for combo in itertools.product(*spaces):
            pol = JointDeterministicPolicy(model.n_actions, combo)
            v = exact_policy_value(model, pol)
            evaluated += 1
            if v > best_v:
                best_v, best_tables = v, combo
    elif method == "best-response":
        spaces = [list(_agent_policies(a, s)) for a, s in zip(model.n_actions[:-1], seqs[:-1])]
        for combo in itertools.product(*spaces):
            v, table = _best_response(model, list(combo), H)
            evaluated += 1
            if v > best_v:
                best_v, best_tables = v, tuple(combo) + (table,)
    else:
        raise ValueError(f"unknown method {method!r}")
    policy = JointDeterministicPolicy(model.n_actions, best_tables)
    return OptimalResult(policy, exact_policy_value(model, policy), evaluated)


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass
class PolicyTables:
    """Per-agent action distributions for every local history, indexed by a history code."""

    probs: list[np.ndarray]             # agent -> (n_histories, n_actions)
    stride: list[int]                   # agent -> n_actions * n_obs
    offsets: list[np.ndarray]           # agent -> start row for each history length


def tabulate_policy(model: DecPomdpModel, policy: JointPolicy, max_rows: int = 2_000_000) -> PolicyTables:
    H = _require_finite(model)
    probs, strides, offsets = [], [], []
    for i, (k, m) in enumerate(zip(model.n_actions, model.n_observations)):
        stride = k * m
        counts = [stride ** t for t in range(H)]
        if sum(counts) > max_rows:
            raise EnumerationBudgetError(f"agent {i}: {sum(counts)} histories to tabulate")
        offs = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        rows = np.empty((sum(counts), k))
        for entries in action_observation_histories(k, m, H):
            code = 0
            for a, o in entries:
                code = code * stride + a * m + o
            rows[offs[len(entries)] + code] = policy.probs(i, LocalHistory(i, entries))
        probs.append(rows)
        strides.append(stride)
        offsets.append(offs)
    return PolicyTables(probs, strides, offsets)


def _vector_draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def monte_carlo_returns(model: DecPomdpModel, policy: JointPolicy, episodes: int,
                        rng: np.random.Generator, tables: PolicyTables | None = None) -> np.ndarray:
    """Discounted returns of ``episodes`` independent rollouts, simulated in lockstep."""
    H = _require_finite(model)
    tables = tabulate_policy(model, policy) if tables is None else tables
    n = model.n_agents
    state = _vector_draw(np.cumsum(model.initial_belief)[None, :].repeat(episodes, 0), rng.random(episodes))
    codes = [np.zeros(episodes, dtype=np.int64) for _ in range(n)]
    returns = np.zeros(episodes)
    T_cdf = np.cumsum(model.transition, axis=-1)
    O_cdf = np.cumsum(model.observation, axis=-1)
    radix = np.cumprod((1,) + model.n_actions[:-1])
    obs_table = model.observation_table
    disc = 1.0
    for t in range(H):
        actions = []
        for i in range(n):
            rows = tables.probs[i][tables.offsets[i][t] + codes[i]]
            actions.append(_vector_draw(np.cumsum(rows, axis=1), rng.random(episodes)))
        ja = sum(a * r for a, r in zip(actions, radix))
        returns += disc * model.reward[state, ja]
        disc *= model.discount
        if t + 1 < H:
            nxt = _vector_draw(T_cdf[state, ja], rng.random(episodes))
            jo = _vector_draw(O_cdf[ja, nxt], rng.random(episodes))
            for i in range(n):
                o_i = obs_table[jo, i]
                codes[i] = codes[i] * tables.stride[i] + actions[i] * model.n_observations[i] + o_i
            state = nxt
    return returns


def monte_carlo_value(model, policy, episodes, rng) -> tuple[float, float]:
    """``(mean, standard error)`` of the Monte-Carlo return."""
    r = monte_carlo_returns(model, policy, episodes, rng)
    se = float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0
    return float(r.mean()), se
