"""Centralized value estimators over joint-history features, the state, or both."""
from __future__ import annotations

import numpy as np

from ..autodiff import ops as T
from ..autodiff.nn import MLP, Module
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import ConfigError, DimensionError

CRITIC_KINDS = ("history", "state", "history-state")


class CriticVariant(Module):
    """``V`` (``n_out = 1``) or ``Q`` over all joint actions (``n_out = |A|``).

    The network only ever receives the inputs its kind names: a state critic
    never sees history features and a history critic never sees the state.
    """

    def __init__(self, kind: str, n_hist_feats: int, n_state_feats: int, n_out: int, rng,
                 hidden: int = 32, activation: str = "tanh"):
        super().__init__()
        if kind not in CRITIC_KINDS:
            raise ConfigError(f"unknown critic kind {kind!r}", field="critic")
        self.kind, self.n_out = kind, n_out
        self.n_hist_feats, self.n_state_feats = n_hist_feats, n_state_feats
        d = {"history": n_hist_feats, "state": n_state_feats,
             "history-state": n_hist_feats + n_state_feats}[kind]
        self.net = MLP([d, hidden, hidden, n_out], rng, activation=activation)

    def inputs(self, hist_feats=None, state_feats=None) -> Tensor:
        if self.kind == "history":
            parts = [hist_feats]
        elif self.kind == "state":
            parts = [state_feats]
        else:
            parts = [hist_feats, state_feats]
        if any(p is None for p in parts):
            raise DimensionError(f"{self.kind} critic is missing an input")
        return parts[0] if len(parts) == 1 else T.concat([as_tensor(p) for p in parts], axis=-1)

    def __call__(self, hist_feats=None, state_feats=None) -> Tensor:
        y = self.net(as_tensor(self.inputs(hist_feats, state_feats)))
        return T.reshape(y, y.shape[:-1]) if self.n_out == 1 else y


def distinct_state_values(critic: CriticVariant, n_states: int) -> np.ndarray:
    """Evaluate a state critic on every one-hot state (its full range of outputs)."""
    if critic.kind != "state":
        raise ConfigError("only a state critic has a finite input set", field="critic")
    return np.unique(critic(state_feats=np.eye(n_states)).data)
