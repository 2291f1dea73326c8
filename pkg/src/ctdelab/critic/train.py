"""On-policy actor-critic learners with decentralized recurrent actors.

IACC bootstraps a joint-action critic Sarsa-style, IA2CC uses a state-value
critic and the one-step TD error as advantage, COMA replaces the actor weight by
the counterfactual advantage, and MAPPO/IPPO run several clipped epochs per batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..agents import AgentBank, softmax_rows
from ..autodiff import ops as T
from ..autodiff.nn import MLP, Module, one_hot
from ..autodiff.optim import Optimizer
from ..autodiff.tensor import Tensor, no_grad
from ..core.exact import exact_policy_value, monte_carlo_value
from ..core.model import DecPomdpModel
from ..core.policy import JointDeterministicPolicy, JointStochasticPolicy
from ..errors import ConfigError
from ..rollout import EpisodeBatch, collect, discounted_returns, episode_length
from .critics import CRITIC_KINDS, CriticVariant
from .losses import coma_advantages, mappo_actor_loss, mappo_critic_loss, policy_entropy

AC_ALGORITHMS = ("iacc", "ia2cc", "coma", "mappo", "ippo")


@dataclass
class ACConfig:
    algorithm: str = "ia2cc"
    critic: str = "history"
    episodes: int = 5000
    batch_episodes: int = 1               # episodes per update
    gamma: float | None = None
    actor_lr: float = 5e-3
    critic_lr: float = 1e-2
    discount_actor: bool = True           # the γ^t factor on actor terms
    entropy: float = 0.0
    ppo_epochs: int = 4
    clip_eps: float = 0.2
    value_clip: bool = True
    value_coef: float = 1.0
    reward_scale: float = 1.0             # training rewards are multiplied by this (policy-invariant)
    critic_time: bool = True              # append a one-hot of the history length to history encodings
    share: bool = False
    prev_action: bool = True
    embed: int = 32
    hidden: int = 32
    critic_hidden: int = 64
    max_grad_norm: float | None = 10.0
    max_steps: int | None = None
    eval_every: int = 0
    eval_episodes: int = 0                # Monte-Carlo evaluation episodes of the stochastic policy
    exact_eval: bool = True

    def validate(self):
        if self.algorithm not in AC_ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}", field="algorithm")
        if self.critic not in CRITIC_KINDS:
            raise ConfigError(f"unknown critic kind {self.critic!r}", field="critic")
        for name in ("episodes", "batch_episodes", "ppo_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive", field=name)
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must lie in (0, 1)", field="clip_eps")
        if self.reward_scale <= 0:
            raise ConfigError("reward_scale must be positive", field="reward_scale")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("learning rates must be positive", field="actor_lr")


class LocalCritic(Module):
    """``V_i(h_i)`` over one agent's own recurrent features plus a one-hot agent id."""

    def __init__(self, n_feats: int, n_agents: int, rng, hidden: int = 64):
        super().__init__()
        self.n_agents = n_agents
        self.net = MLP([n_feats + n_agents, hidden, hidden, 1], rng, activation="tanh")

    def __call__(self, feats: np.ndarray, agent: int) -> Tensor:
        ids = np.zeros(feats.shape[:-1] + (self.n_agents,))
        ids[..., agent] = 1.0
        y = self.net(Tensor(np.concatenate([feats, ids], axis=-1)))
        return T.reshape(y, y.shape[:-1])


class ActorCriticNets(Module):
    def __init__(self, model: DecPomdpModel, cfg: ACConfig, rng):
        super().__init__()
        share = cfg.share or cfg.algorithm == "ippo"
        self.algorithm = cfg.algorithm
        self.n_actions = tuple(model.n_actions)
        self.n_agents = model.n_agents
        self.n_states = model.n_states
        self.n_joint_actions = model.n_joint_actions
        self.radix = np.cumprod((1,) + self.n_actions[:-1])
        # history lengths 0..L; saturated recurrent features alone can make them hard to tell apart
        self.n_time = episode_length(model, cfg.max_steps) + 1 if cfg.critic_time else 0
        self.actors = AgentBank(model.n_observations, model.n_actions, rng, share=share,
                                prev_action=cfg.prev_action, embed=cfg.embed, hidden=cfg.hidden,
                                head_gain=0.1)
        if cfg.algorithm == "ippo":
            self.critic = LocalCritic(cfg.hidden + self.n_time, self.n_agents, rng, hidden=cfg.critic_hidden)
        else:
            n_out = self.n_joint_actions if cfg.algorithm in ("iacc", "coma") else 1
            self.critic = CriticVariant(cfg.critic, self.n_agents * cfg.hidden + self.n_time, model.n_states,
                                        n_out, rng, hidden=cfg.critic_hidden)

    def state_feats(self, states):
        return one_hot(states, self.n_states)

    def with_time(self, feats: np.ndarray, lengths) -> np.ndarray:
        """Append the history-length one-hot (a no-op when disabled)."""
        if not self.n_time:
            return feats
        t = np.broadcast_to(np.asarray(lengths), feats.shape[:-1])
        return np.concatenate([feats, one_hot(t, self.n_time)], axis=-1)

    def sequence_feats(self, hiddens: list) -> np.ndarray:
        """Joint-history encodings ``(B, L + 1, ·)`` from per-agent hidden sequences."""
        joint = np.concatenate(hiddens, axis=-1)
        return self.with_time(joint, np.arange(joint.shape[1]))

    def local_feats(self, hidden: np.ndarray) -> np.ndarray:
        return self.with_time(hidden, np.arange(hidden.shape[1]))


def joint_probs(probs: list) -> np.ndarray:
    """Product distribution over joint actions (agent 0 least significant)."""
    p = probs[0]
    for q in probs[1:]:
        p = (q[..., :, None] * p[..., None, :]).reshape(p.shape[:-1] + (-1,))
    return p


def sample_actions(probs: list, rng: np.random.Generator) -> np.ndarray:
    """One inverse-CDF draw per agent and row."""
    out = []
    for p in probs:
        u = rng.random(p.shape[0])
        idx = (u[:, None] >= np.cumsum(p, axis=1)).sum(axis=1)
        out.append(np.minimum(idx, p.shape[1] - 1))
    return np.stack(out, axis=-1)


def make_sampler(actors: AgentBank, n_envs: int, rng):
    """Acting callback; reads only each agent's own last observation and action."""
    hidden = {"h": actors.initial(n_envs)}

    def act(t, last_obs, last_act):
        if t == 0:
            hidden["h"] = actors.initial(n_envs)
        logits, hidden["h"] = actors.act_step(last_obs, last_act, hidden["h"], n_envs)
        return sample_actions([softmax_rows(y) for y in logits], rng)
    return act


def stochastic_policy(actors: AgentBank, model: DecPomdpModel, horizon: int | None = None):
    H = horizon or model.horizon
    return JointStochasticPolicy(model.n_actions, actors.output_tables(H, softmax_rows))


def greedy_policy(actors: AgentBank, model: DecPomdpModel, horizon: int | None = None):
    H = horizon or model.horizon
    return JointDeterministicPolicy(model.n_actions, tuple(actors.greedy_tables(H)))


@dataclass
class _Forward:
    log_probs: list          # per agent Tensor (B, L, A_i)
    chosen: Tensor           # (B, L, n) log π_i(a_i|h_i)
    hist: np.ndarray         # (B, L + 1, n * H) gradient-stopped actor features
    hiddens: list            # per agent (B, L + 1, H) arrays


def _actor_forward(nets: ActorCriticNets, batch: EpisodeBatch) -> _Forward:
    L = batch.length
    logits, hiddens = nets.actors.unroll_all(batch.observations, batch.actions)
    log_probs = [T.log_softmax(y[:, :L], axis=-1) for y in logits]
    chosen = T.stack([T.gather(lp, batch.actions[:, :, i], axis=-1) for i, lp in enumerate(log_probs)], axis=-1)
    hids = [h.data for h in hiddens]
    return _Forward(log_probs, chosen, nets.sequence_feats(hids), hids)


def _discounts(gamma: float, L: int, on: bool) -> np.ndarray:
    return gamma ** np.arange(L) if on else np.ones(L)


def _bootstrap_mask(batch: EpisodeBatch) -> np.ndarray:
    return 1.0 - batch.terminal.astype(np.float64)


def actor_critic_losses(nets: ActorCriticNets, batch: EpisodeBatch, gamma: float, cfg: ACConfig):
    """Critic and actor objectives for one IACC / IA2CC / COMA update on ``batch``."""
    L = batch.length
    fw = _actor_forward(nets, batch)
    s = nets.state_feats(batch.states)
    nt = _bootstrap_mask(batch)
    disc = _discounts(gamma, L, cfg.discount_actor)[None, :, None]
    out = nets.critic(fw.hist, s)
    probs = [np.exp(lp.data) for lp in fw.log_probs]
    if nets.algorithm in ("iacc", "coma"):
        ja = batch.actions @ nets.radix
        q_t = T.gather(out[:, :L], ja, axis=-1)
        q_next = np.zeros((batch.size, L))
        if L > 1:
            q_next[:, :-1] = np.take_along_axis(out.data[:, 1:L], ja[:, 1:, None], axis=-1)[..., 0]
        if nt[:, -1].any():
            # truncated episode: expected Q at the final history under the current policy
            with no_grad():
                logits, _ = nets.actors.unroll_all(batch.observations, batch.actions)
            p_last = joint_probs([softmax_rows(y.data[:, L]) for y in logits])
            q_next[:, -1] = (p_last * out.data[:, L]).sum(axis=-1)
        target = batch.rewards + gamma * nt * q_next
        delta = target - q_t.data
        critic_loss = 0.5 * T.mean(T.square(target - q_t))
        if nets.algorithm == "iacc":
            weight = np.repeat(q_t.data[..., None], nets.n_agents, axis=-1)
        else:
            weight = coma_advantages(out.data[:, :L], probs, batch.actions, nets.radix)
    else:
        v = out
        v_next = np.zeros((batch.size, L))
        v_next[:, :] = v.data[:, 1:]
        target = batch.rewards + gamma * nt * v_next
        delta = target - v.data[:, :L]
        critic_loss = 0.5 * T.mean(T.square(target - v[:, :L]))
        weight = np.repeat(delta[..., None], nets.n_agents, axis=-1)
    actor_obj = T.tsum(disc * weight * fw.chosen) * (1.0 / batch.size)
    if cfg.entropy:
        ent = T.mean(T.stack([policy_entropy(lp) for lp in fw.log_probs], axis=-1))
        actor_obj = actor_obj + cfg.entropy * ent
    return critic_loss, actor_obj, {"critic_loss": critic_loss.item(), "mean_abs_td": float(np.abs(delta).mean())}


def ppo_update(nets: ActorCriticNets, batch: EpisodeBatch, gamma: float, cfg: ACConfig, actor_opt, critic_opt):
    """Several clipped epochs on one batch; returns diagnostics including the mean policy shift."""
    L, n = batch.length, nets.n_agents
    s = nets.state_feats(batch.states)
    nt = _bootstrap_mask(batch)
    with no_grad():
        fw0 = _actor_forward(nets, batch)
        if nets.algorithm == "ippo":
            v_old = np.stack([nets.critic(nets.local_feats(fw0.hiddens[i]), i).data for i in range(n)],
                             axis=-1)                                                      # (B, L+1, n)
        else:
            v_old = np.repeat(nets.critic(fw0.hist, s).data[..., None], n, axis=-1)
    old_logp = fw0.chosen.data
    old_probs = [np.exp(lp.data) for lp in fw0.log_probs]
    adv = batch.rewards[..., None] + gamma * nt[..., None] * v_old[:, 1:] - v_old[:, :L]          # (B, L, n)
    returns = discounted_returns(batch.rewards, gamma)
    if nt[:, -1].any():
        returns = returns + (gamma ** np.arange(L, 0, -1))[None] * (nt[:, -1:] * v_old[:, L, 0:1])
    info = {}
    for _ in range(cfg.ppo_epochs):
        actor_opt.zero_grad()
        critic_opt.zero_grad()
        fw = _actor_forward(nets, batch)
        ratio = T.exp(fw.chosen - old_logp)
        surrogate = T.mean(mappo_actor_loss(ratio, adv, cfg.clip_eps))
        if nets.algorithm == "ippo":
            v_new = T.stack([nets.critic(nets.local_feats(fw.hiddens[i])[:, :L], i) for i in range(n)], axis=-1)
            c_loss = T.mean(mappo_critic_loss(v_new, v_old[:, :L], returns[..., None], cfg.clip_eps, cfg.value_clip))
        else:
            v_new = nets.critic(fw.hist[:, :L], s[:, :L])
            c_loss = T.mean(mappo_critic_loss(v_new, v_old[:, :L, 0], returns, cfg.clip_eps, cfg.value_clip))
        obj = surrogate
        if cfg.entropy:
            obj = obj + cfg.entropy * T.mean(T.stack([policy_entropy(lp) for lp in fw.log_probs], axis=-1))
        loss = cfg.value_coef * c_loss - obj
        loss.backward()
        actor_opt.step()
        critic_opt.step()
        info = {"critic_loss": c_loss.item(), "surrogate": surrogate.item()}
    with no_grad():
        fw1 = _actor_forward(nets, batch)
    shift = np.mean([0.5 * np.abs(np.exp(lp.data) - p).sum(axis=-1).mean() for lp, p in zip(fw1.log_probs, old_probs)])
    info["policy_shift"] = float(shift)
    info["mean_abs_td"] = float(np.abs(adv).mean())
    return info


@dataclass
class ACResult:
    nets: ActorCriticNets
    policy: JointStochasticPolicy | None = None
    greedy: JointDeterministicPolicy | None = None
    metrics: list = field(default_factory=list)
    history: list = field(default_factory=list)


def evaluate_actors(nets: ActorCriticNets, model: DecPomdpModel, exact: bool = True, mc_episodes: int = 0,
                    rng: np.random.Generator | None = None) -> dict:
    out = {}
    if model.horizon is None:
        return out
    policy = stochastic_policy(nets.actors, model)
    if exact:
        out["exact_value"] = float(exact_policy_value(model, policy))
        out["greedy_value"] = float(exact_policy_value(model, greedy_policy(nets.actors, model)))
    if mc_episodes:
        out["mc_return"], out["mc_se"] = monte_carlo_value(model, policy, mc_episodes, rng)
    return out


def train_actor_critic(model: DecPomdpModel, cfg: ACConfig, streams, callback=None) -> ACResult:
    """On-policy loop: collect ``batch_episodes`` episodes, update, repeat."""
    cfg.validate()
    gamma = model.discount if cfg.gamma is None else cfg.gamma
    episode_length(model, cfg.max_steps)
    nets = ActorCriticNets(model, cfg, streams["init"])
    actor_opt = Optimizer(nets.actors.parameters(), kind="adam", lr=cfg.actor_lr, max_grad_norm=cfg.max_grad_norm)
    critic_opt = Optimizer(nets.critic.parameters(), kind="adam", lr=cfg.critic_lr, max_grad_norm=cfg.max_grad_norm)
    result = ACResult(nets)
    episode, next_eval = 0, cfg.eval_every or cfg.episodes
    while episode < cfg.episodes:
        k = min(cfg.batch_episodes, cfg.episodes - episode)
        batch = collect(model, k, make_sampler(nets.actors, k, streams["explore"]), streams["env"], cfg.max_steps)
        episode += k
        ret = float((batch.rewards * gamma ** np.arange(batch.length)).sum(axis=1).mean())
        if cfg.reward_scale != 1.0:
            batch = replace(batch, rewards=batch.rewards * cfg.reward_scale)
        if cfg.algorithm in ("mappo", "ippo"):
            info = ppo_update(nets, batch, gamma, cfg, actor_opt, critic_opt)
        else:
            actor_opt.zero_grad()
            critic_opt.zero_grad()
            c_loss, a_obj, info = actor_critic_losses(nets, batch, gamma, cfg)
            (c_loss - a_obj).backward()
            critic_opt.step()
            actor_opt.step()
        info["return"] = ret
        result.history.append(info)
        if episode >= next_eval or episode == cfg.episodes:
            row = {"episode": episode, **info,
                   **evaluate_actors(nets, model, cfg.exact_eval, cfg.eval_episodes, streams["eval"])}
            result.metrics.append(row)
            if callback is not None:
                callback(row)
            next_eval = episode + (cfg.eval_every or cfg.episodes)
    if model.horizon is not None:
        result.policy = stochastic_policy(nets.actors, model)
        result.greedy = greedy_policy(nets.actors, model)
    return result
