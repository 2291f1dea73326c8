"""Per-agent recurrent networks over local action-observation histories.

Step inputs are one-hot encodings: a start token at ``t = 0``, afterwards the
last local observation, optionally the agent's own last action, and optionally
a one-hot agent id when one network is shared by all agents.  Nothing outside
agent ``i``'s own columns is ever read when building agent ``i``'s inputs.
"""
from __future__ import annotations

import numpy as np

from .autodiff import ops as T
from .autodiff.nn import Module, RecurrentAgentNet
from .autodiff.tensor import Tensor, no_grad
from .errors import ConfigError


class AgentBank(Module):
    """One recurrent net per agent, or a single shared one with agent-id inputs."""

    def __init__(self, n_obs, n_actions, rng, share: bool = False, prev_action: bool = False,
                 embed: int = 32, hidden: int = 32, head_gain: float = 1.0):
        super().__init__()
        self.n_obs, self.n_actions = tuple(n_obs), tuple(n_actions)
        self.n_agents = len(self.n_actions)
        self.share, self.prev_action = share, prev_action
        self.hidden = hidden
        if share and (len(set(self.n_obs)) > 1 or len(set(self.n_actions)) > 1):
            raise ConfigError("parameter sharing needs identical per-agent spaces", field="share")
        self._dims = [self._in_dim(i) for i in range(self.n_agents)]
        if share:
            self.shared = RecurrentAgentNet(self._dims[0], self.n_actions[0], rng, embed, hidden, head_gain)
        else:
            for i in range(self.n_agents):
                setattr(self, f"agent{i}", RecurrentAgentNet(self._dims[i], self.n_actions[i], rng,
                                                             embed, hidden, head_gain))

    def _in_dim(self, i: int) -> int:
        d = self.n_obs[i] + 1
        if self.prev_action:
            d += self.n_actions[i]
        if self.share:
            d += self.n_agents
        return d

    def net(self, i: int) -> RecurrentAgentNet:
        return self.shared if self.share else getattr(self, f"agent{i}")

    # -- input encoding (local columns only)
    def encode_step(self, i: int, last_obs_i, last_act_i, batch: int) -> np.ndarray:
        """Input for agent ``i`` given its own last observation/action (None at t = 0)."""
        x = np.zeros((batch, self._dims[i]))
        O, A = self.n_obs[i], self.n_actions[i]
        rows = np.arange(batch)
        if last_obs_i is None:
            x[:, O] = 1.0
        else:
            x[rows, np.asarray(last_obs_i)] = 1.0
            if self.prev_action:
                x[rows, O + 1 + np.asarray(last_act_i)] = 1.0
        if self.share:
            x[:, self._dims[i] - self.n_agents + i] = 1.0
        return x

    def encode_sequence(self, i: int, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """(B, L) local observations/actions of agent ``i`` -> (B, L + 1, d) inputs."""
        B, L = obs.shape
        out = np.empty((B, L + 1, self._dims[i]))
        out[:, 0] = self.encode_step(i, None, None, B)
        for t in range(L):
            out[:, t + 1] = self.encode_step(i, obs[:, t], actions[:, t], B)
        return out

    # -- forward passes
    def unroll(self, i: int, obs: np.ndarray, actions: np.ndarray):
        """Outputs and hidden states for histories of length 0..L: (B, L+1, A_i), (B, L+1, H)."""
        outs, hiddens = self.net(i).unroll(self.encode_sequence(i, obs, actions))
        return T.stack(outs, axis=1), T.stack(hiddens, axis=1)

    def unroll_all(self, batch_obs: np.ndarray, batch_actions: np.ndarray):
        """``batch_obs``/``batch_actions`` (B, L, n); returns per-agent output and hidden lists."""
        outs, hids = [], []
        for i in range(self.n_agents):
            o, h = self.unroll(i, batch_obs[:, :, i], batch_actions[:, :, i])
            outs.append(o)
            hids.append(h)
        return outs, hids

    def initial(self, batch: int) -> list[Tensor]:
        return [self.net(i).cell.initial(batch) for i in range(self.n_agents)]

    def act_step(self, last_obs, last_act, hiddens, batch: int):
        """Advance every agent one step; returns (per-agent output arrays, new hiddens)."""
        outs, new_h = [], []
        with no_grad():
            for i in range(self.n_agents):
                lo = None if last_obs is None else last_obs[:, i]
                la = None if last_act is None else last_act[:, i]
                y, h = self.net(i).step(Tensor(self.encode_step(i, lo, la, batch)), hiddens[i])
                outs.append(y.data)
                new_h.append(h)
        return outs, new_h

    # -- tabulation over every local history
    def greedy_tables(self, horizon: int) -> list[dict]:
        """Per agent: observation sequence -> argmax action (lowest index on ties).

        Own previous actions are implied by the greedy rule along the sequence.
        """
        tables = []
        for i in range(self.n_agents):
            table = {}
            seqs = [()]
            h = self.net(i).cell.initial(1)
            x = self.encode_step(i, None, None, 1)
            for depth in range(horizon):
                with no_grad():
                    y, h = self.net(i).step(Tensor(x), h)
                acts = np.argmax(y.data, axis=1)
                for s, a in zip(seqs, acts):
                    table[s] = int(a)
                if depth + 1 == horizon:
                    break
                O = self.n_obs[i]
                seqs = [s + (o,) for s in seqs for o in range(O)]
                rep = np.repeat(np.arange(len(acts)), O)
                h = Tensor(h.data[rep])
                x = self.encode_step(i, np.tile(np.arange(O), len(acts)), acts[rep], len(rep))
            tables.append(table)
        return tables

    def output_tables(self, horizon: int, transform=None) -> list[dict]:
        """Per agent: action-observation ``entries`` -> output row (after ``transform``)."""
        tables = []
        for i in range(self.n_agents):
            table = {}
            A, O = self.n_actions[i], self.n_obs[i]
            keys = [()]
            h = self.net(i).cell.initial(1)
            x = self.encode_step(i, None, None, 1)
            for depth in range(horizon):
                with no_grad():
                    y, h = self.net(i).step(Tensor(x), h)
                rows = transform(y.data) if transform is not None else y.data
                for k, r in zip(keys, rows):
                    table[k] = r
                if depth + 1 == horizon:
                    break
                pairs = [(a, o) for a in range(A) for o in range(O)]
                keys = [k + (p,) for k in keys for p in pairs]
                rep = np.repeat(np.arange(len(rows)), len(pairs))
                h = Tensor(h.data[rep])
                a_col = np.tile([p[0] for p in pairs], len(rows))
                o_col = np.tile([p[1] for p in pairs], len(rows))
                x = self.encode_step(i, o_col, a_col, len(rep))
            tables.append(table)
        return tables


def softmax_rows(y: np.ndarray) -> np.ndarray:
    z = y - y.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
