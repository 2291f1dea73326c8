from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor


@dataclass
class Optimizer:
    """SGD or Adam over a fixed list of parameter tensors (updated in place)."""

    params: list
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: float | None = None
    steps: int = 0
    m: list = field(default_factory=list, repr=False)
    v: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        self.params = list(self.params)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, grads=None):
        grads = [p.grad for p in self.params] if grads is None else [np.asarray(g, float) for g in grads]
        if len(grads) != len(self.params):
            raise DimensionError("one gradient per parameter required")
        for p, g in zip(self.params, grads):
            if g.shape != p.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if self.max_grad_norm is not None:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
            if norm > self.max_grad_norm:
                grads = [g * (self.max_grad_norm / norm) for g in grads]
        self.steps += 1
        if self.kind == "sgd":
            for p, g in zip(self.params, grads):
                p.data -= self.lr * g
            return
        c1 = 1.0 - self.beta1 ** self.steps
        c2 = 1.0 - self.beta2 ** self.steps
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _functional(kind, params, grads, optimizer: Optimizer | None, **kw):
    tensors = [Tensor(np.array(p, dtype=np.float64, copy=True), requires_grad=True) for p in params]
    opt = Optimizer(tensors, kind=kind, **kw) if optimizer is None else optimizer
    if optimizer is not None:
        for t, p in zip(opt.params, params):
            np.copyto(t.data, p)
    opt.step(grads)
    return [t.data.copy() for t in opt.params], opt


def sgd_step(params, grads, optimizer: Optimizer | None = None, lr: float = 1e-2):
    """Array-in/array-out SGD update; returns ``(new_params, optimizer)``."""
    return _functional("sgd", params, grads, optimizer, lr=lr)


def adam_step(params, grads, optimizer: Optimizer | None = None, lr: float = 1e-3):
    """Array-in/array-out Adam update; pass the returned optimizer back in to keep moments."""
    return _functional("adam", params, grads, optimizer, lr=lr)


def soft_update(target_params, live_params, tau: float):
    for t, p in zip(target_params, live_params):
        t.data *= 1.0 - tau
        t.data += tau * p.data
