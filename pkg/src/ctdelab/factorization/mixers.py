"""Factorization heads: additive, monotone hypernetwork, unconstrained, transformation and dueling."""
from __future__ import annotations

import numpy as np

from ..autodiff import ops as T
from ..autodiff.nn import ACTIVATIONS, MLP, HyperLinear, Module
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import DimensionError

POSITIVE_FLOOR = 1e-10


def vdn_joint(q_locals) -> float:
    """Joint value of an additive factorization: the plain sum."""
    return float(np.sum(q_locals))


class MixerVDN(Module):
    """Parameter-free sum of the chosen per-agent utilities."""

    def __call__(self, q, state_feats=None):
        return T.tsum(as_tensor(q), axis=-1)


class MixerQMIX(Module):
    """Two state-conditioned hyper-layers with non-negative weights.

    ``Q_tot = w2(s) · act(W1(s)ᵀ q + b1(s)) + b2(s)``; with ``act`` monotone and
    all generated weights ≥ 0, ``Q_tot`` is non-decreasing in every ``q_i``.
    """

    def __init__(self, n_agents: int, n_state_feats: int, rng, embed: int = 8,
                 hyper_hidden: int | None = 16, activation: str = "elu", nonneg: str = "abs"):
        super().__init__()
        if activation not in ("elu", "relu", "tanh", "linear"):
            raise ValueError(f"activation {activation!r} is not monotone or unknown")
        self.n_agents, self.n_state_feats, self.embed = n_agents, n_state_feats, embed
        self.activation = activation
        self.hyper1 = HyperLinear(n_state_feats, n_agents, embed, rng, hidden=hyper_hidden, nonneg=nonneg)
        final_bias = MLP([n_state_feats, embed, 1], rng, activation="relu")
        self.hyper2 = HyperLinear(n_state_feats, embed, 1, rng, hidden=hyper_hidden, nonneg=nonneg,
                                  bias=final_bias)

    def __call__(self, q, state_feats):
        cond = as_tensor(state_feats)
        hidden = ACTIVATIONS[self.activation](self.hyper1(as_tensor(q), cond))
        return T.reshape(self.hyper2(hidden, cond), cond.shape[:-1])

    def generated_weights(self, state_feats):
        cond = as_tensor(state_feats)
        return self.hyper1.weights(cond).data, self.hyper2.weights(cond).data


def qmix_forward(mixer: MixerQMIX, q_chosen, state_feats) -> Tensor:
    return mixer(q_chosen, state_feats)


class QStarMixer(Module):
    """Unconstrained joint network over chosen utilities, state features and optional extras."""

    def __init__(self, n_agents: int, n_state_feats: int, rng, hidden: int = 32, n_extra: int = 0):
        super().__init__()
        self.n_extra = n_extra
        self.net = MLP([n_agents + n_state_feats + n_extra, hidden, hidden, 1], rng, activation="relu")

    def __call__(self, q, state_feats, extra=None):
        parts = [as_tensor(q), as_tensor(state_feats)]
        if self.n_extra:
            if extra is None:
                raise DimensionError("this joint network expects extra history features")
            parts.append(as_tensor(extra))
        y = self.net(T.concat(parts, axis=-1))
        return T.reshape(y, y.shape[:-1])


class QTRANHeads(Module):
    """Joint Q over all joint actions and the state-value offset, both over joint-history features."""

    def __init__(self, n_hist_feats: int, n_joint_actions: int, rng, hidden: int = 32):
        super().__init__()
        self.n_joint_actions = n_joint_actions
        self.joint_q = MLP([n_hist_feats, hidden, hidden, n_joint_actions], rng, activation="relu")
        self.v = MLP([n_hist_feats, hidden, 1], rng, activation="relu")

    def q_all(self, hist_feats) -> Tensor:
        return self.joint_q(as_tensor(hist_feats))

    def value(self, hist_feats) -> Tensor:
        y = self.v(as_tensor(hist_feats))
        return T.reshape(y, y.shape[:-1])


def qtran_value_identity(joint_q_row, local_rows) -> float:
    """``max_a Q(h, a) - Σ_i max_{a_i} Q_i(h_i, a_i)``: the value offset implied by the QTRAN constraint.

    Training learns ``V`` with its own head; at a point where ``L_opt`` is zero
    and the local argmaxes pick the joint argmax, the learned ``V`` equals this.
    """
    return float(np.max(joint_q_row) - sum(np.max(q) for q in local_rows))


class QPLEXHeads(Module):
    """State transformation (``w_i > 0``, ``b_i``) and positive ``λ_i`` over (state, joint action)."""

    def __init__(self, n_agents: int, n_state_feats: int, n_joint_actions: int, rng, hidden: int = 32):
        super().__init__()
        self.n_agents, self.n_joint_actions = n_agents, n_joint_actions
        self.w_net = MLP([n_state_feats, hidden, n_agents], rng, activation="relu")
        self.b_net = MLP([n_state_feats, hidden, n_agents], rng, activation="relu")
        self.lam_net = MLP([n_state_feats + n_joint_actions, hidden, n_agents], rng, activation="relu")

    def w(self, state_feats) -> Tensor:
        return T.tabs(self.w_net(as_tensor(state_feats))) + POSITIVE_FLOOR

    def b(self, state_feats) -> Tensor:
        return self.b_net(as_tensor(state_feats))

    def lam(self, state_feats, joint_action_feats) -> Tensor:
        x = T.concat([as_tensor(state_feats), as_tensor(joint_action_feats)], axis=-1)
        return T.tabs(self.lam_net(x)) + POSITIVE_FLOOR


def dueling(q_rows, actions):
    """Per-agent ``V_i = max_a Q_i`` and ``A_i = Q_i(a_i) - V_i`` stacked on the last axis."""
    values, advs = [], []
    for i, q in enumerate(q_rows):
        v = T.tmax(q, axis=-1)
        values.append(v)
        advs.append(T.gather(q, actions[..., i], axis=-1) - v)
    return T.stack(values, axis=-1), T.stack(advs, axis=-1)


def qplex_forward(heads: QPLEXHeads, q_rows, actions, state_feats, joint_action_feats) -> Tensor:
    """``Σ_i w_i(s) V_i + b_i(s) + λ_i(s, a) w_i(s) A_i``."""
    actions = np.asarray(actions, dtype=np.int64)
    v, a = dueling(q_rows, actions)
    w = heads.w(state_feats)
    terms = w * v + heads.b(state_feats) + heads.lam(state_feats, joint_action_feats) * w * a
    return T.tsum(terms, axis=-1)
