"""Exact expectations of actor-gradient estimators by enumerating every trajectory.

Used to check that subtracting a critic baseline leaves the expected policy
gradient unchanged.  Only for tiny models: the number of paths grows as
``(|S| |A| |S| |O|)^H``.
"""
from __future__ import annotations

import numpy as np

from ..agents import AgentBank
from ..autodiff import ops as T
from ..autodiff.tensor import Tensor
from ..core.exact import exact_policy_value, exact_q_value
from ..core.model import DecPomdpModel
from ..core.policy import JointHistory, JointPolicy


def enumerate_paths(model: DecPomdpModel, policy: JointPolicy):
    """Yield ``(probability, steps)`` with ``steps = [(state, joint_history, joint_action, reward)]``."""
    H = model.horizon
    obs_table = model.observation_table

    def rec(t, state, jh, prob, steps):
        if t == H:
            yield prob, steps
            return
        for ja, pa in policy.joint_action_probs(jh):
            j = model.joint_action_index(ja)
            step = steps + [(state, jh, ja, float(model.reward[state, j]))]
            if t + 1 == H:
                yield prob * pa, step
                continue
            for s2 in np.flatnonzero(model.transition[state, j]):
                pt = model.transition[state, j, s2]
                for jo in np.flatnonzero(model.observation[j, s2]):
                    po = model.observation[j, s2, jo]
                    yield from rec(t + 1, int(s2), jh.extend(ja, tuple(obs_table[jo])), prob * pa * pt * po, step)

    for s0 in np.flatnonzero(model.initial_belief):
        yield from rec(0, int(s0), JointHistory.empty(model.n_agents), float(model.initial_belief[s0]), [])


def expected_actor_gradient(model: DecPomdpModel, actors: AgentBank, policy: JointPolicy, form: str,
                            gamma: float | None = None, discount_actor: bool = True) -> list[np.ndarray]:
    """``E[Σ_t γ^t X_t Σ_i ∇ log π_i(a_{i,t}|h_{i,t})]`` under ``policy`` (the actors' own).

    ``form="q"`` uses ``X_t = Q^π(h_t, a_t)``; ``form="td"`` uses the sampled
    TD error ``r_t + γ V^π(h_{t+1}) - V^π(h_t)``.  Both critics are exact.
    """
    gamma = model.discount if gamma is None else gamma
    H = model.horizon
    v_cache, q_cache = {}, {}

    def V(jh):
        if len(jh) == H:
            return 0.0
        if jh not in v_cache:
            v_cache[jh] = exact_policy_value(model, policy, jh)
        return v_cache[jh]

    def Q(jh, ja):
        key = (jh, ja)
        if key not in q_cache:
            q_cache[key] = exact_q_value(model, policy, jh, ja)
        return q_cache[key]

    coeff: dict = {}
    for prob, steps in enumerate_paths(model, policy):
        for t, (state, jh, ja, r) in enumerate(steps):
            if form == "q":
                x = Q(jh, ja)
            else:
                nxt = steps[t + 1][1] if t + 1 < len(steps) else None
                x = r + gamma * (V(nxt) if nxt is not None else 0.0) - V(jh)
            w = prob * (gamma ** t if discount_actor else 1.0) * x
            for i, h in enumerate(jh.locals):
                key = (i, h.entries, ja[i])
                coeff[key] = coeff.get(key, 0.0) + w
    for p in actors.parameters():
        p.zero_grad()
    objective = _weighted_log_probs(actors, coeff)
    objective.backward()
    return [p.grad.copy() for p in actors.parameters()]


def _weighted_log_probs(actors: AgentBank, coeff: dict) -> Tensor:
    """``Σ coeff[(i, entries, a)] · log π_i(a | entries)`` with one unroll per distinct history."""
    total = Tensor(0.0)
    by_agent: dict = {}
    for (i, entries, a), c in coeff.items():
        by_agent.setdefault(i, {}).setdefault(entries, []).append((a, c))
    for i, hist in by_agent.items():
        for entries, items in hist.items():
            obs = np.array([[o for _, o in entries]], dtype=np.int64).reshape(1, len(entries))
            acts = np.array([[a for a, _ in entries]], dtype=np.int64).reshape(1, len(entries))
            logits, _ = actors.unroll(i, obs, acts)
            lp = T.log_softmax(logits[:, len(entries)], axis=-1)
            w = np.zeros(actors.n_actions[i])
            for a, c in items:
                w[a] += c
            total = total + T.tsum(lp * w[None])
    return total
