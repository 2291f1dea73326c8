"""History vs state vs history-state critics on the same task and seeds."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff.nn import one_hot
from ..autodiff.tensor import no_grad
from ..core.exact import exact_policy_value, history_belief, reachable_histories
from ..core.model import DecPomdpModel
from ..core.policy import JointHistory
from ..envs import HEAR_LEFT, LISTEN
from .critics import CRITIC_KINDS, distinct_state_values
from .train import ACConfig, ActorCriticNets, train_actor_critic


# small critic steps and scaled rewards keep the tanh critic out of saturation
STUDY_DEFAULTS = {"batch_episodes": 8, "critic_lr": 1e-3, "reward_scale": 0.1}


def study_config(**overrides) -> ACConfig:
    return ACConfig(**{**STUDY_DEFAULTS, **overrides})


def heard_left_twice(n_agents: int = 2) -> JointHistory:
    """Dec-Tiger joint history: everyone listened twice and heard the tiger on the left both times."""
    step = ((LISTEN,) * n_agents, (HEAR_LEFT,) * n_agents)
    return JointHistory.from_steps([step, step], n_agents)


def history_features(nets: ActorCriticNets, jh: JointHistory) -> np.ndarray:
    """The joint-history encoding the critic sees after ``jh`` (actor hidden states, history length)."""
    feats = []
    with no_grad():
        for i, h in enumerate(jh.locals):
            obs = np.array([h.observations], dtype=np.int64).reshape(1, len(h))
            acts = np.array([h.actions], dtype=np.int64).reshape(1, len(h))
            _, hid = nets.actors.unroll(i, obs, acts)
            feats.append(hid.data[0, len(h)])
    return nets.with_time(np.concatenate(feats), len(jh))


def critic_value(nets: ActorCriticNets, jh: JointHistory, state: int | None = None) -> float:
    """``V̂`` at a joint history (and state, for the kinds that read it)."""
    s = one_hot(np.array([0 if state is None else state]), nets.n_states)
    with no_grad():
        return float(nets.critic(history_features(nets, jh)[None], s).data[0])


def belief_consistency(nets: ActorCriticNets, model: DecPomdpModel, policy, max_len: int | None = None) -> dict:
    """Compare ``E_{s|h}[V̂(h, s)]`` with the exact ``V^π(h)`` over reachable histories."""
    gaps = []
    H = model.horizon
    for jh in reachable_histories(model, policy, max_len=(H - 1) if max_len is None else max_len):
        b = history_belief(model, jh)
        feats = history_features(nets, jh)
        with no_grad():
            v_hs = nets.critic(np.repeat(feats[None], model.n_states, 0), np.eye(model.n_states)).data
        gaps.append(abs(float(b @ v_hs) - exact_policy_value(model, policy, jh)))
    return {"histories": len(gaps), "mean_abs_gap": float(np.mean(gaps)), "max_abs_gap": float(np.max(gaps))}


@dataclass
class StudyReport:
    rows: list = field(default_factory=list)            # (kind, mean exact value, std over seeds)
    values: dict = field(default_factory=dict)          # kind -> per-seed exact values
    distinct_state_values: list = field(default_factory=list)
    consistency: list = field(default_factory=list)
    history_ordering: list = field(default_factory=list)

    def table(self) -> str:
        lines = ["critic,mean_exact_value,std_over_seeds"]
        lines += [f"{k},{m!r},{s!r}" for k, m, s in self.rows]
        return "\n".join(lines) + "\n"


def critic_study(model: DecPomdpModel, cfg: ACConfig, seeds, streams_factory, probe=None) -> StudyReport:
    """Run IA2CC once per (seed, critic kind) and evaluate every learned policy exactly.

    ``streams_factory(seed)`` returns a fresh stream dict; every kind sees the same
    seed streams.  ``probe`` is a joint history whose critic value is compared with
    the empty history's for the history-reading kinds.
    """
    report = StudyReport()
    for kind in CRITIC_KINDS:
        vals = []
        for seed in seeds:
            res = train_actor_critic(model, replace(cfg, algorithm="ia2cc", critic=kind), streams_factory(seed))
            vals.append(float(exact_policy_value(model, res.policy)))
            if kind == "state":
                report.distinct_state_values.append(len(distinct_state_values(res.nets.critic, model.n_states)))
            if kind == "history-state":
                report.consistency.append(belief_consistency(res.nets, model, res.policy))
            if probe is not None and kind != "state":
                empty = JointHistory.empty(model.n_agents)
                if kind == "history":
                    v_probe, v_empty = critic_value(res.nets, probe), critic_value(res.nets, empty)
                else:
                    # read the history-state critic in expectation over the belief
                    v_probe = _belief_value(res.nets, model, probe)
                    v_empty = _belief_value(res.nets, model, empty)
                report.history_ordering.append({"kind": kind, "seed": seed, "probe": v_probe, "empty": v_empty})
        report.values[kind] = vals
        report.rows.append((kind, float(np.mean(vals)), float(np.std(vals))))
    return report


def _belief_value(nets, model, jh) -> float:
    b = history_belief(model, jh)
    feats = history_features(nets, jh)
    with no_grad():
        v = nets.critic(np.repeat(feats[None], model.n_states, 0), np.eye(model.n_states)).data
    return float(b @ v)
