"""Parameter containers and the network families used by the learners."""
from __future__ import annotations

import copy
from collections import OrderedDict

import numpy as np

from ..errors import DimensionError
from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = {
    "tanh": T.tanh,
    "relu": T.relu,
    "elu": T.elu,
    "linear": lambda x: x,
}


class Module:
    """Holds parameters and sub-modules in attribute-assignment order."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> "OrderedDict[str, Tensor]":
        out = OrderedDict()
        for name, p in self._params.items():
            out[prefix + name] = p
        for name, m in self._modules.items():
            out.update(m.named_parameters(prefix + name + "."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def clone(self) -> "Module":
        return copy.deepcopy(self)

    def load_from(self, other: "Module") -> None:
        """Copy parameter values (bit-exact) from a module of the same structure."""
        mine, theirs = self.named_parameters(), other.named_parameters()
        if list(mine) != list(theirs):
            raise DimensionError("module structures differ")
        for name, p in mine.items():
            np.copyto(p.data, theirs[name].data)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self.named_parameters().items())

    def load_state_dict(self, state) -> None:
        params = self.named_parameters()
        if set(params) != set(state):
            raise DimensionError("checkpoint keys do not match module parameters")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise DimensionError(f"{name}: shape {arr.shape} != {p.shape}")
            np.copyto(p.data, arr)


def param(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def _glorot(rng, fan_in, fan_out, shape, gain=1.0):
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, gain: float = 1.0, bias: bool = True):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.weight = param(_glorot(rng, n_in, n_out, (n_in, n_out), gain))
        self.bias = param(np.zeros(n_out)) if bias else None

    def __call__(self, x):
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class MLP(Module):
    """Dense layers; ``activation`` applies between layers, ``out_activation`` after the last."""

    def __init__(self, sizes, rng, activation="tanh", out_activation="linear", out_gain=1.0):
        super().__init__()
        if len(sizes) < 2:
            raise DimensionError("MLP needs at least input and output sizes")
        self.sizes = tuple(sizes)
        self.activation, self.out_activation = activation, out_activation
        self.n_layers = len(sizes) - 1
        for k in range(self.n_layers):
            gain = out_gain if k == self.n_layers - 1 else 1.0
            setattr(self, f"layer{k}", Linear(sizes[k], sizes[k + 1], rng, gain=gain))

    def __call__(self, x):
        for k in range(self.n_layers):
            x = getattr(self, f"layer{k}")(x)
            act = self.out_activation if k == self.n_layers - 1 else self.activation
            x = ACTIVATIONS[act](x)
        return x


class GRUCell(Module):
    """Gated recurrent cell: update gate z, reset gate r, candidate n.

    ``h' = (1 - z) * n + z * h`` with ``n = tanh(W_n x + r * (U_n h) + b_n)``.
    """

    def __init__(self, n_in: int, n_hidden: int, rng):
        super().__init__()
        self.n_in, self.n_hidden = n_in, n_hidden
        H = n_hidden
        self.w_x = param(_glorot(rng, n_in, H, (n_in, 3 * H)))
        self.w_h = param(_glorot(rng, H, H, (H, 3 * H)))
        self.b_x = param(np.zeros(3 * H))
        self.b_h = param(np.zeros(3 * H))

    def initial(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.n_hidden)))

    def __call__(self, x, h):
        H = self.n_hidden
        gx = T.matmul(x, self.w_x) + self.b_x
        gh = T.matmul(h, self.w_h) + self.b_h
        z = T.sigmoid(gx[..., :H] + gh[..., :H])
        r = T.sigmoid(gx[..., H:2 * H] + gh[..., H:2 * H])
        n = T.tanh(gx[..., 2 * H:] + r * gh[..., 2 * H:])
        return n + z * (h - n)


NONNEG = {"abs": T.tabs, "softplus": T.softplus}


class HyperLinear(Module):
    """Linear layer whose weights and bias are generated from a conditioning vector.

    Generated weights pass through a non-negativity transform (``abs`` or
    ``softplus``); the generated bias is unconstrained.
    """

    def __init__(self, n_cond: int, n_in: int, n_out: int, rng, hidden: int | None = None,
                 nonneg: str = "abs", bias=True):
        super().__init__()
        if nonneg not in NONNEG:
            raise ValueError(f"unknown non-negativity transform {nonneg!r}")
        self.n_cond, self.n_in, self.n_out = n_cond, n_in, n_out
        self.nonneg = nonneg
        sizes = [n_cond, n_in * n_out] if hidden is None else [n_cond, hidden, n_in * n_out]
        self.weight_gen = MLP(sizes, rng, activation="relu")
        # ``bias`` may be a ready-made module (e.g. a deeper MLP) instead of a flag
        if isinstance(bias, Module):
            self.bias_gen = bias
        elif bias:
            self.bias_gen = Linear(n_cond, n_out, rng)
        else:
            self.bias_gen = None

    def weights(self, cond) -> Tensor:
        raw = self.weight_gen(cond)
        w = NONNEG[self.nonneg](raw)
        return T.reshape(w, cond.shape[:-1] + (self.n_in, self.n_out))

    def bias(self, cond) -> Tensor | None:
        return None if self.bias_gen is None else self.bias_gen(cond)

    def __call__(self, x, cond):
        """``x``: (..., n_in); ``cond``: (..., n_cond) -> (..., n_out)."""
        w = self.weights(cond)
        y = T.tsum(T.expand_dims(x, -1) * w, axis=-2)
        b = self.bias(cond)
        return y if b is None else y + b


def one_hot(idx, n: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros(idx.shape + (n,))
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


class RecurrentAgentNet(Module):
    """Encoder MLP -> GRU -> linear head; the per-agent history network.

    Inputs per step are built by the caller (one-hot observation plus optional
    previous-action and agent-id one-hots).
    """

    def __init__(self, n_in: int, n_out: int, rng, embed: int = 32, hidden: int = 32,
                 head_gain: float = 1.0):
        super().__init__()
        self.n_in, self.n_out, self.hidden = n_in, n_out, hidden
        self.encoder = MLP([n_in, embed], rng, activation="relu", out_activation="relu")
        self.cell = GRUCell(embed, hidden, rng)
        self.head = Linear(hidden, n_out, rng, gain=head_gain)

    def step(self, x, h):
        h2 = self.cell(self.encoder(x), h)
        return self.head(h2), h2

    def unroll(self, inputs: np.ndarray):
        """``inputs``: (B, T, n_in) -> lists of per-step outputs and hidden states."""
        B, steps = inputs.shape[0], inputs.shape[1]
        h = self.cell.initial(B)
        outs, hiddens = [], []
        for t in range(steps):
            y, h = self.step(Tensor(inputs[:, t]), h)
            outs.append(y)
            hiddens.append(h)
        return outs, hiddens
