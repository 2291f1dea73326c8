"""The shared episodic training loop for every factorization head."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff.optim import Optimizer
from ..core.exact import exact_policy_value, monte_carlo_value
from ..core.model import DecPomdpModel
from ..core.policy import JointDeterministicPolicy
from ..errors import ConfigError
from ..rollout import collect, episode_length
from .buffer import EpisodeBuffer
from .losses import ALGORITHMS, FactorizationNets, total_loss


def eps_greedy(q_values, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Per agent: uniform action with probability ``epsilon``, else argmax (lowest index on ties).

    ``q_values`` is a list of per-agent arrays shaped (A_i,) or (B, A_i); two
    uniforms per agent and row are drawn whether or not they are used.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must lie in [0, 1]", field="epsilon")
    out = []
    for q in q_values:
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        B, A = q.shape
        explore = rng.random(B) < epsilon
        rand_a = np.minimum((rng.random(B) * A).astype(np.int64), A - 1)
        out.append(np.where(explore, rand_a, np.argmax(q, axis=1)))
    acts = np.stack(out, axis=-1)
    return acts[0] if np.ndim(q_values[0]) == 1 else acts


@dataclass
class TargetBank:
    """Frozen copy of the live networks, refreshed only by ``sync``."""

    live: FactorizationNets
    frozen: FactorizationNets = None
    staleness: int = 0

    def __post_init__(self):
        self.frozen = self.live.clone()

    def sync(self):
        self.frozen.load_from(self.live)
        self.staleness = 0

    def tick(self, episodes: int = 1):
        self.staleness += episodes


@dataclass
class VFConfig:
    algorithm: str = "qmix"
    episodes: int = 5000
    gamma: float | None = None            # None: use the model's discount
    lr: float = 5e-3
    batch_episodes: int = 32
    episodes_per_iter: int = 1
    capacity: int = 5000
    target_sync: int = 200                # C, in episodes
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5             # share of training over which epsilon decays
    alpha: float = 0.5
    reward_scale: float = 1.0             # stored rewards are multiplied by this (greedy policy unchanged)
    share: bool = False
    prev_action: bool = False
    embed: int = 32
    hidden: int = 32
    mixer_embed: int = 8
    head_hidden: int = 32
    mixer_activation: str = "elu"
    nonneg: str = "abs"
    qstar_condition: str = "state"
    truncate: int | None = None
    max_steps: int | None = None
    max_grad_norm: float | None = 10.0
    eval_every: int = 0                   # 0: evaluate only at the end
    eval_episodes: int = 0                # Monte-Carlo greedy evaluation episodes (0 = skip)
    exact_eval: bool = True

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}", field="algorithm")
        for name in ("episodes", "batch_episodes", "episodes_per_iter", "capacity", "target_sync"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive", field=name)
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]", field="alpha")
        if not (0.0 <= self.eps_end <= 1.0 and 0.0 <= self.eps_start <= 1.0):
            raise ConfigError("epsilon bounds must lie in [0, 1]", field="eps_start")
        if self.reward_scale <= 0.0:
            raise ConfigError("reward_scale must be positive", field="reward_scale")
        if self.lr <= 0.0:
            raise ConfigError("lr must be positive", field="lr")

    def epsilon(self, episode: int) -> float:
        span = max(1.0, self.eps_fraction * self.episodes)
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class VFResult:
    nets: FactorizationNets
    policy: JointDeterministicPolicy | None
    metrics: list = field(default_factory=list)
    losses: list = field(default_factory=list)


def build_nets(model: DecPomdpModel, cfg: VFConfig, rng: np.random.Generator) -> FactorizationNets:
    return FactorizationNets(cfg.algorithm, model.n_observations, model.n_actions, model.n_states, rng,
                             share=cfg.share, prev_action=cfg.prev_action, embed=cfg.embed,
                             hidden=cfg.hidden, mixer_embed=cfg.mixer_embed, head_hidden=cfg.head_hidden,
                             mixer_activation=cfg.mixer_activation, nonneg=cfg.nonneg,
                             qstar_condition=cfg.qstar_condition)


def greedy_policy(nets: FactorizationNets, model: DecPomdpModel, horizon: int | None = None):
    """Decentralized greedy policy ``π_i(h_i) = argmax_a Q_i(h_i, a)`` tabulated over all decision points."""
    H = horizon or model.horizon
    return JointDeterministicPolicy(model.n_actions, tuple(nets.bank.greedy_tables(H)))


def make_actor(nets: FactorizationNets, n_envs: int, epsilon: float, rng: np.random.Generator):
    """Acting callback over local inputs only: the mixer and the state never enter here."""
    bank = nets.bank
    hidden = {"h": bank.initial(n_envs)}

    def act(t, last_obs, last_act):
        if t == 0:
            hidden["h"] = bank.initial(n_envs)
        q, hidden["h"] = bank.act_step(last_obs, last_act, hidden["h"], n_envs)
        return eps_greedy(q, epsilon, rng)
    return act


def evaluate_greedy(nets, model, rng, mc_episodes: int = 0, exact: bool = True) -> dict:
    out = {}
    if model.horizon is None:
        return out
    policy = greedy_policy(nets, model)
    if exact:
        out["exact_value"] = float(exact_policy_value(model, policy))
    if mc_episodes:
        out["mc_return"], out["mc_se"] = monte_carlo_value(model, policy, mc_episodes, rng)
    return out


def train_value_factorization(model: DecPomdpModel, cfg: VFConfig, streams, callback=None) -> VFResult:
    """Generalized episodic loop: act ε-greedily, store, sample whole episodes, step, sync every C.

    ``streams`` maps a role ("init", "env", "explore", "replay", "eval") to a
    ``numpy.random.Generator``; the harness derives them from a master seed.
    """
    cfg.validate()
    gamma = model.discount if cfg.gamma is None else cfg.gamma
    L = episode_length(model, cfg.max_steps)
    nets = build_nets(model, cfg, streams["init"])
    target = TargetBank(nets)
    opt = Optimizer(nets.parameters(), kind="adam", lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    buffer = EpisodeBuffer(cfg.capacity, L, model.n_agents, cfg.truncate)
    result = VFResult(nets, None)
    episode, since_sync, next_eval = 0, 0, cfg.eval_every or cfg.episodes
    while episode < cfg.episodes:
        k = min(cfg.episodes_per_iter, cfg.episodes - episode)
        eps = cfg.epsilon(episode)
        batch = collect(model, k, make_actor(nets, k, eps, streams["explore"]), streams["env"], cfg.max_steps)
        if cfg.reward_scale != 1.0:
            batch = replace(batch, rewards=batch.rewards * cfg.reward_scale)
        buffer.add(batch)
        episode += k
        since_sync += k
        sample = buffer.sample(cfg.batch_episodes, streams["replay"])
        opt.zero_grad()
        loss, parts = total_loss(sample, nets, target.frozen, gamma, alpha=cfg.alpha)
        loss.backward()
        opt.step()
        result.losses.append(parts["loss"])
        target.tick(k)
        if since_sync >= cfg.target_sync:
            target.sync()
            since_sync = 0
        if episode >= next_eval or episode == cfg.episodes:
            row = {"episode": episode, "epsilon": eps, **parts}
            row.update(evaluate_greedy(nets, model, streams["eval"], cfg.eval_episodes, cfg.exact_eval))
            result.metrics.append(row)
            if callback is not None:
                callback(row)
            next_eval = episode + (cfg.eval_every or cfg.episodes)
    if model.horizon is not None:
        result.policy = greedy_policy(nets, model)
    return result
