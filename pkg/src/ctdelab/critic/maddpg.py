"""Deterministic-policy actor-critic for a small continuous cooperative game.

Every agent outputs one real number; the team reward after each stage is
``-(Σ_i a_i - c)²``.  The game repeats for ``horizon`` stages, and the only
history information is the stage index, so history features are a one-hot of
the stage (a start token at stage 0).  A single shared critic ``Q(h, a)``
takes those features and the joint action.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import ops as T
from ..autodiff.nn import MLP, Module
from ..autodiff.optim import Optimizer, soft_update
from ..autodiff.tensor import Tensor, no_grad
from ..errors import ConfigError, UnsupportedError


@dataclass
class SumGameSpec:
    n_agents: int = 2
    target: float = 1.5
    horizon: int = 1
    discount: float = 0.9

    def reward(self, joint_action: np.ndarray) -> np.ndarray:
        return -(joint_action.sum(axis=-1) - self.target) ** 2


@dataclass
class MADDPGConfig:
    steps: int = 20000
    batch: int = 64
    capacity: int = 20000
    actor_lr: float = 1e-3
    critic_lr: float = 3e-3
    noise: float = 0.3
    noise_end: float = 0.05
    tau: float = 0.01
    warmup: int = 256
    hidden: int = 32
    others_from: str = "buffer"       # or "current": a_{-i} from the current actors
    eval_every: int = 0

    def validate(self):
        if self.others_from not in ("buffer", "current"):
            raise ConfigError(f"unknown others_from {self.others_from!r}", field="others_from")
        if self.steps < 1 or self.batch < 1:
            raise ConfigError("steps and batch must be positive", field="steps")


def history_feats(stage: np.ndarray, horizon: int) -> np.ndarray:
    return np.eye(horizon)[np.asarray(stage, dtype=np.int64)]


def policy_return(spec: SumGameSpec, actors) -> float:
    """Discounted return of the deterministic joint policy (the game has no noise)."""
    total = 0.0
    with no_grad():
        for t in range(spec.horizon):
            f = history_feats(np.array([t]), spec.horizon)
            a = np.array([mu(f).data[0] for mu in actors])
            total += spec.discount ** t * float(spec.reward(a))
    return total


class DeterministicActor(Module):
    """``μ_i(h_i)``: history features -> one real action."""

    def __init__(self, n_feats: int, rng, hidden: int = 32):
        super().__init__()
        self.net = MLP([n_feats, hidden, 1], rng, activation="tanh", out_gain=0.1)

    def __call__(self, feats) -> Tensor:
        y = self.net(feats if isinstance(feats, Tensor) else Tensor(feats))
        return T.reshape(y, y.shape[:-1])


class JointActionCritic(Module):
    """``Q(h, a)`` over history features and the continuous joint action."""

    def __init__(self, n_feats: int, n_agents: int, rng, hidden: int = 32):
        super().__init__()
        self.net = MLP([n_feats + n_agents, hidden, hidden, 1], rng, activation="tanh")

    def __call__(self, feats, joint_action) -> Tensor:
        x = T.concat([feats if isinstance(feats, Tensor) else Tensor(feats),
                      joint_action if isinstance(joint_action, Tensor) else Tensor(joint_action)], axis=-1)
        y = self.net(x)
        return T.reshape(y, y.shape[:-1])


def maddpg_actor_objective(i: int, actor: DeterministicActor, critic: JointActionCritic, feats: np.ndarray,
                           others: np.ndarray) -> Tensor:
    """Mean ``Q(h, a)`` with ``a_i = μ_i(h_i)`` and the other components fixed to ``others``.

    Its gradient in the actor parameters is the chain rule through the critic's
    action input, ``∇μ_i(h_i) ∇_{a_i} Q(h, a)``.
    """
    if others.ndim != 2:
        raise UnsupportedError("continuous joint actions expected (batch, n_agents)")
    mu = actor(feats)
    cols = [T.expand_dims(mu, -1) if j == i else Tensor(others[:, j:j + 1]) for j in range(others.shape[1])]
    return T.mean(critic(feats, T.concat(cols, axis=-1)))


def maddpg_actor_grad(i, actor, critic, feats, others) -> list[np.ndarray]:
    actor.zero_grad()
    critic.zero_grad()
    maddpg_actor_objective(i, actor, critic, feats, others).backward()
    return [p.grad.copy() for p in actor.parameters()]


def maddpg_critic_loss(batch: dict, critic: JointActionCritic, target_critic: JointActionCritic,
                       target_actors: list, gamma: float, horizon: int) -> Tensor:
    """``(y - Q(h, a))²`` with ``y = r + γ Q⁻(h', μ⁻(h'))`` (no bootstrap at the last stage)."""
    feats = history_feats(batch["stage"], horizon)
    with no_grad():
        nxt_stage = np.minimum(batch["stage"] + 1, horizon - 1)
        nxt_feats = history_feats(nxt_stage, horizon)
        nxt_a = np.stack([mu(nxt_feats).data for mu in target_actors], axis=-1)
        boot = target_critic(nxt_feats, nxt_a).data
    y = batch["reward"] + gamma * (1.0 - batch["done"]) * boot
    return T.mean(T.square(y - critic(feats, batch["action"])))


@dataclass
class MADDPGResult:
    actors: list
    critic: JointActionCritic
    metrics: list = field(default_factory=list)

    def joint_action(self, stage: int = 0, horizon: int = 1) -> np.ndarray:
        f = history_feats(np.array([stage]), horizon)
        with no_grad():
            return np.array([mu(f).data[0] for mu in self.actors])


def train_maddpg(spec: SumGameSpec, cfg: MADDPGConfig, streams, callback=None) -> MADDPGResult:
    """Off-policy training: Gaussian exploration, replay, target networks with soft updates."""
    cfg.validate()
    n, H = spec.n_agents, spec.horizon
    rng_init, rng_env, rng_replay = streams["init"], streams["explore"], streams["replay"]
    actors = [DeterministicActor(H, rng_init, cfg.hidden) for _ in range(n)]
    critic = JointActionCritic(H, n, rng_init, cfg.hidden)
    t_actors = [a.clone() for a in actors]
    t_critic = critic.clone()
    a_opts = [Optimizer(a.parameters(), kind="adam", lr=cfg.actor_lr) for a in actors]
    c_opt = Optimizer(critic.parameters(), kind="adam", lr=cfg.critic_lr)
    buf = {"stage": np.zeros(cfg.capacity, dtype=np.int64), "action": np.zeros((cfg.capacity, n)),
           "reward": np.zeros(cfg.capacity), "done": np.zeros(cfg.capacity)}
    count = cursor = 0
    result = MADDPGResult(actors, critic)
    next_eval = cfg.eval_every or cfg.steps
    for step in range(cfg.steps):
        stage = step % H
        frac = min(1.0, step / max(1, cfg.steps // 2))
        sigma = cfg.noise + frac * (cfg.noise_end - cfg.noise)
        f = history_feats(np.array([stage]), H)
        with no_grad():
            a = np.array([mu(f).data[0] for mu in actors]) + sigma * rng_env.standard_normal(n)
        r = float(spec.reward(a))
        buf["stage"][cursor], buf["action"][cursor] = stage, a
        buf["reward"][cursor], buf["done"][cursor] = r, float(stage == H - 1)
        cursor = (cursor + 1) % cfg.capacity
        count = min(count + 1, cfg.capacity)
        if count < min(cfg.warmup, cfg.capacity):
            continue
        rows = rng_replay.integers(count, size=cfg.batch)
        batch = {k: v[rows] for k, v in buf.items()}
        c_opt.zero_grad()
        loss = maddpg_critic_loss(batch, critic, t_critic, t_actors, spec.discount, H)
        loss.backward()
        c_opt.step()
        feats = history_feats(batch["stage"], H)
        if cfg.others_from == "current":
            with no_grad():
                others = np.stack([mu(feats).data for mu in actors], axis=-1)
        else:
            others = batch["action"]
        for i, (mu, opt) in enumerate(zip(actors, a_opts)):
            grads = maddpg_actor_grad(i, mu, critic, feats, others)
            opt.step([-g for g in grads])            # ascend Q
        soft_update(t_critic.parameters(), critic.parameters(), cfg.tau)
        for ta, mu in zip(t_actors, actors):
            soft_update(ta.parameters(), mu.parameters(), cfg.tau)
        if step + 1 >= next_eval or step + 1 == cfg.steps:
            ja = result.joint_action(0, H)
            row = {"step": step + 1, "critic_loss": loss.item(), "sum": float(ja.sum()),
                   "gap": float(abs(ja.sum() - spec.target)), "return": policy_return(spec, actors)}
            result.metrics.append(row)
            if callback is not None:
                callback(row)
            next_eval = step + 1 + (cfg.eval_every or cfg.steps)
    return result
