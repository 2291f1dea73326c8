"""The factorization networks bundle and the per-algorithm regression losses.

Every loss takes a batch of whole episodes, the live bundle and a frozen target
bundle.  Targets are built from the target bundle under ``no_grad``; the next
greedy joint action ``ã'`` is the per-agent local argmax of the target agent nets.
"""
from __future__ import annotations

import numpy as np

from ..agents import AgentBank
from ..autodiff import ops as T
from ..autodiff.nn import Module, one_hot
from ..autodiff.tensor import Tensor, no_grad
from ..errors import ConfigError, DimensionError
from ..rollout import EpisodeBatch
from .mixers import MixerQMIX, MixerVDN, QPLEXHeads, QStarMixer, QTRANHeads, qplex_forward

ALGORITHMS = ("vdn", "qmix", "cwqmix", "owqmix", "qtran-base", "qtran-alt", "qplex")


def drqn_target(reward, next_q, discount: float, terminal) -> np.ndarray | float:
    """``r + γ max_a' Q⁻(h', a')``, or ``r`` at terminal steps."""
    reward = np.asarray(reward, dtype=np.float64)
    boot = np.max(np.asarray(next_q, dtype=np.float64), axis=-1)
    out = reward + discount * np.where(terminal, 0.0, boot)
    return float(out) if out.ndim == 0 else out


class FactorizationNets(Module):
    """Agent utilities plus whatever heads the algorithm needs."""

    def __init__(self, algorithm: str, n_obs, n_actions, n_states: int, rng, share: bool = False,
                 prev_action: bool = False, embed: int = 32, hidden: int = 32, mixer_embed: int = 8,
                 head_hidden: int = 32, mixer_activation: str = "elu", nonneg: str = "abs",
                 qstar_condition: str = "state"):
        super().__init__()
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algorithm!r}", field="algorithm")
        if qstar_condition not in ("state", "history-state"):
            raise ConfigError(f"unknown conditioning {qstar_condition!r}", field="qstar_condition")
        self.algorithm = algorithm
        self.n_actions = tuple(n_actions)
        self.n_agents = len(self.n_actions)
        self.n_states = n_states
        self.n_joint_actions = int(np.prod(self.n_actions))
        self.radix = np.cumprod((1,) + self.n_actions[:-1])
        self.qstar_condition = qstar_condition
        self.bank = AgentBank(n_obs, n_actions, rng, share=share, prev_action=prev_action,
                              embed=embed, hidden=hidden)
        n = self.n_agents
        if algorithm == "vdn":
            self.mixer = MixerVDN()
        elif algorithm in ("qmix", "cwqmix", "owqmix"):
            self.mixer = MixerQMIX(n, n_states, rng, embed=mixer_embed, activation=mixer_activation,
                                   nonneg=nonneg)
        elif algorithm == "qplex":
            self.mixer = QPLEXHeads(n, n_states, self.n_joint_actions, rng, hidden=head_hidden)
        else:
            self.mixer = QTRANHeads(n * hidden, self.n_joint_actions, rng, hidden=head_hidden)
        if algorithm in ("cwqmix", "owqmix"):
            # the unconstrained estimate gets its own agent networks
            self.qstar_bank = AgentBank(n_obs, n_actions, rng, share=share, prev_action=prev_action,
                                        embed=embed, hidden=hidden)
            extra = n * hidden if qstar_condition == "history-state" else 0
            self.qstar_mixer = QStarMixer(n, n_states, rng, hidden=head_hidden, n_extra=extra)

    def state_feats(self, states) -> np.ndarray:
        return one_hot(states, self.n_states)

    def joint_index(self, actions) -> np.ndarray:
        return np.asarray(actions, dtype=np.int64) @ self.radix

    def joint_feats(self, actions) -> np.ndarray:
        return one_hot(self.joint_index(actions), self.n_joint_actions)


def _check_batch(batch: EpisodeBatch, nets: FactorizationNets):
    if batch.size == 0 or batch.length == 0:
        raise DimensionError("empty batch")
    if batch.states is None:
        raise DimensionError("batch carries no states")
    if batch.actions.shape[2] != nets.n_agents:
        raise DimensionError("batch agent count does not match the networks")


def _chosen(q_rows, actions, L):
    """Stack ``Q_i(h_t, a_{i,t})`` for t < L: (B, L, n)."""
    return T.stack([T.gather(q[:, :L], actions[:, :, i], axis=-1) for i, q in enumerate(q_rows)], axis=-1)


def _greedy(q_rows) -> np.ndarray:
    return np.stack([np.argmax(q.data, axis=-1) for q in q_rows], axis=-1)


def _hist(hiddens) -> np.ndarray:
    return np.concatenate([h.data for h in hiddens], axis=-1)


class _Target:
    """Target-side quantities at ``t + 1``, computed without gradient."""

    def __init__(self, batch: EpisodeBatch, target: FactorizationNets, gamma: float):
        with no_grad():
            self.q_rows, self.hiddens = target.bank.unroll_all(batch.observations, batch.actions)
        self.next_actions = _greedy(self.q_rows)[:, 1:]        # ã' for every step
        self.batch, self.gamma = batch, gamma
        self.not_term = 1.0 - batch.terminal.astype(np.float64)

    def y(self, bootstrap: np.ndarray) -> np.ndarray:
        return self.batch.rewards + self.gamma * self.not_term * bootstrap

    def next_chosen(self) -> np.ndarray:
        return np.stack([np.take_along_axis(q.data[:, 1:], self.next_actions[..., i:i + 1], axis=-1)[..., 0]
                         for i, q in enumerate(self.q_rows)], axis=-1)


def drqn_loss(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float) -> Tensor:
    """Independent recurrent Q-learning: every agent regresses on the team reward with its own target."""
    _check_batch(batch, live)
    L = batch.length
    tgt = _Target(batch, target, gamma)
    y = np.stack([tgt.y(q.data[:, 1:].max(axis=-1)) for q in tgt.q_rows], axis=-1)
    q_rows, _ = live.bank.unroll_all(batch.observations, batch.actions)
    return T.mean(T.square(y - _chosen(q_rows, batch.actions, L)))


def vdn_loss(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float) -> Tensor:
    _check_batch(batch, live)
    L = batch.length
    tgt = _Target(batch, target, gamma)
    y = tgt.y(np.sum([q.data[:, 1:].max(axis=-1) for q in tgt.q_rows], axis=0))
    q_rows, _ = live.bank.unroll_all(batch.observations, batch.actions)
    pred = T.tsum(_chosen(q_rows, batch.actions, L), axis=-1)
    return T.mean(T.square(y - pred))


def qmix_loss(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float) -> Tensor:
    _check_batch(batch, live)
    L = batch.length
    s = live.state_feats(batch.states)
    tgt = _Target(batch, target, gamma)
    with no_grad():
        boot = target.mixer(Tensor(tgt.next_chosen()), s[:, 1:]).data
    y = tgt.y(boot)
    q_rows, _ = live.bank.unroll_all(batch.observations, batch.actions)
    q_tot = live.mixer(_chosen(q_rows, batch.actions, L), s[:, :L])
    return T.mean(T.square(y - q_tot))


def wqmix_weight(kind: str, y, qtot, qstar_at_astar, is_astar, alpha: float):
    """CW: 1 where ``a = ã*`` or ``y > Q̂*(ã*)``; OW: 1 where ``y > Q_tot``; ``alpha`` elsewhere."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]", field="alpha")
    y = np.asarray(y, dtype=np.float64)
    if kind == "cw":
        full = np.logical_or(np.asarray(is_astar, dtype=bool), y > np.asarray(qstar_at_astar))
    elif kind == "ow":
        full = y > np.asarray(qtot)
    else:
        raise ConfigError(f"unknown weighting {kind!r}", field="weighting")
    w = np.where(full, 1.0, alpha)
    return float(w) if w.ndim == 0 else w


def _qstar(nets: FactorizationNets, q_star_chosen, s, hiddens):
    extra = _hist(hiddens) if nets.qstar_condition == "history-state" else None
    return nets.qstar_mixer(q_star_chosen, s, extra)


def wqmix_losses(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float,
                 alpha: float = 0.5, kind: str | None = None):
    """``(loss_cent, loss_tot)``: unweighted regression of ``Q̂*`` and weighted regression of ``Q_tot``."""
    _check_batch(batch, live)
    kind = kind or ("cw" if live.algorithm == "cwqmix" else "ow")
    L = batch.length
    s = live.state_feats(batch.states)
    tgt = _Target(batch, target, gamma)
    with no_grad():
        qs_rows_t, qs_hid_t = target.qstar_bank.unroll_all(batch.observations, batch.actions)
        nxt = np.stack([np.take_along_axis(q.data[:, 1:], tgt.next_actions[..., i:i + 1], axis=-1)[..., 0]
                        for i, q in enumerate(qs_rows_t)], axis=-1)
        boot = _qstar(target, Tensor(nxt), s[:, 1:], [h[:, 1:] for h in qs_hid_t]).data
    y = tgt.y(boot)

    qs_rows, qs_hid = live.qstar_bank.unroll_all(batch.observations, batch.actions)
    hid_now = [h[:, :L] for h in qs_hid]
    q_star = _qstar(live, _chosen(qs_rows, batch.actions, L), s[:, :L], hid_now)
    loss_cent = T.mean(T.square(y - q_star))

    q_rows, _ = live.bank.unroll_all(batch.observations, batch.actions)
    q_tot = live.mixer(_chosen(q_rows, batch.actions, L), s[:, :L])
    with no_grad():
        a_star = _greedy([q[:, :L] for q in q_rows])
        is_astar = np.all(a_star == batch.actions, axis=-1)
        qs_astar = np.stack([np.take_along_axis(q.data[:, :L], a_star[..., i:i + 1], axis=-1)[..., 0]
                             for i, q in enumerate(qs_rows)], axis=-1)
        q_star_at = _qstar(live, Tensor(qs_astar), s[:, :L], [Tensor(h.data) for h in hid_now]).data
    w = wqmix_weight(kind, y, q_tot.data, q_star_at, is_astar, alpha)
    loss_tot = T.mean(w * T.square(y - q_tot))
    return loss_cent, loss_tot


def qtran_losses(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float,
                 variant: str = "base"):
    """``(L_td, L_opt, L_nopt)``; ``variant="alt"`` swaps in the counterfactual min-loss."""
    _check_batch(batch, live)
    if variant not in ("base", "alt"):
        raise ConfigError(f"unknown QTRAN variant {variant!r}", field="variant")
    L, n = batch.length, live.n_agents
    tgt = _Target(batch, target, gamma)
    with no_grad():
        boot_all = target.mixer.q_all(_hist(tgt.hiddens)[:, 1:]).data
    boot = np.take_along_axis(boot_all, target.joint_index(tgt.next_actions)[..., None], axis=-1)[..., 0]
    y = tgt.y(boot)

    q_rows, hiddens = live.bank.unroll_all(batch.observations, batch.actions)
    feats = _hist(hiddens)[:, :L]                       # joint-history features, gradient-stopped
    q_all = live.mixer.q_all(feats)                     # (B, L, |A|)
    ja = live.joint_index(batch.actions)
    l_td = T.mean(T.square(y - T.gather(q_all, ja, axis=-1)))

    q_bar = q_all.data                                  # not trained by the constraint losses
    v = live.mixer.value(feats)
    rows = [q[:, :L] for q in q_rows]
    a_tilde = _greedy(rows)
    q_prime_tilde = T.tsum(T.stack([T.tmax(q, axis=-1) for q in rows], axis=-1), axis=-1)
    qbar_tilde = np.take_along_axis(q_bar, live.joint_index(a_tilde)[..., None], axis=-1)[..., 0]
    l_opt = T.mean(T.square(q_prime_tilde - qbar_tilde + v))

    chosen = _chosen(q_rows, batch.actions, L)
    if variant == "base":
        d = T.tsum(chosen, axis=-1) - np.take_along_axis(q_bar, ja[..., None], axis=-1)[..., 0] + v
        mask = np.any(a_tilde != batch.actions, axis=-1).astype(np.float64)
        l_nopt = T.mean(mask * T.square(T.minimum(d, 0.0)))
        return l_td, l_opt, l_nopt

    total = T.tsum(chosen, axis=-1)
    terms = []
    for i in range(n):
        A = live.n_actions[i]
        others = total - chosen[..., i]
        cf_actions = np.repeat(batch.actions[:, :, None, :], A, axis=2)
        cf_actions[..., i] = np.arange(A)
        qbar_cf = np.take_along_axis(q_bar, live.joint_index(cf_actions), axis=-1)       # (B, L, A)
        d = rows[i] + T.expand_dims(others, -1) - qbar_cf + T.expand_dims(v, -1)
        terms.append(T.square(-T.tmax(-d, axis=-1)))
    l_nopt = T.mean(T.stack(terms, axis=-1))
    return l_td, l_opt, l_nopt


def qplex_loss(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float) -> Tensor:
    _check_batch(batch, live)
    L = batch.length
    s = live.state_feats(batch.states)
    tgt = _Target(batch, target, gamma)
    with no_grad():
        boot = qplex_forward(target.mixer, [q[:, 1:] for q in tgt.q_rows], tgt.next_actions, s[:, 1:],
                             target.joint_feats(tgt.next_actions)).data
    y = tgt.y(boot)
    q_rows, _ = live.bank.unroll_all(batch.observations, batch.actions)
    q_tot = qplex_forward(live.mixer, [q[:, :L] for q in q_rows], batch.actions, s[:, :L],
                          live.joint_feats(batch.actions))
    return T.mean(T.square(y - q_tot))


def total_loss(batch: EpisodeBatch, live: FactorizationNets, target: FactorizationNets, gamma: float,
               alpha: float = 0.5, opt_weight: float = 1.0, nopt_weight: float = 1.0):
    """Scalar objective for one gradient step plus a dict of its components."""
    algo = live.algorithm
    if algo == "vdn":
        loss = vdn_loss(batch, live, target, gamma)
        return loss, {"loss": loss.item()}
    if algo == "qmix":
        loss = qmix_loss(batch, live, target, gamma)
        return loss, {"loss": loss.item()}
    if algo == "qplex":
        loss = qplex_loss(batch, live, target, gamma)
        return loss, {"loss": loss.item()}
    if algo in ("cwqmix", "owqmix"):
        cent, tot = wqmix_losses(batch, live, target, gamma, alpha)
        return cent + tot, {"loss": cent.item() + tot.item(), "loss_cent": cent.item(), "loss_tot": tot.item()}
    td, opt, nopt = qtran_losses(batch, live, target, gamma, variant=algo.split("-")[1])
    loss = td + opt_weight * opt + nopt_weight * nopt
    return loss, {"loss": loss.item(), "loss_td": td.item(), "loss_opt": opt.item(), "loss_nopt": nopt.item()}
