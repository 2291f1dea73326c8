"""Actor-critic estimators: counterfactual advantage and the clipped surrogate objectives."""
from __future__ import annotations

import numpy as np

from ..autodiff import ops as T
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import DimensionError, NumericError


def coma_advantage(joint_q_row, policy_row, chosen: int) -> float:
    """``Q(h, a) - Σ_a' π_i(a'|h_i) Q(h, a', a_{-i})`` for one agent.

    ``joint_q_row`` holds ``Q(h, ·, a_{-i})`` over agent i's actions.
    """
    q = np.asarray(joint_q_row, dtype=np.float64)
    p = np.asarray(policy_row, dtype=np.float64)
    if q.shape != p.shape or q.ndim != 1:
        raise DimensionError(f"rows misaligned: {q.shape} vs {p.shape}")
    if not 0 <= chosen < len(q):
        raise DimensionError(f"chosen action {chosen} out of range")
    return float(q[chosen] - p @ q)


def coma_advantages(q_all: np.ndarray, probs: list, actions: np.ndarray, radix: np.ndarray) -> np.ndarray:
    """Batched counterfactual advantages: (..., n) from Q over joint actions (..., |A|)."""
    n = actions.shape[-1]
    ja = actions @ radix
    out = np.empty(actions.shape)
    for i in range(n):
        A = probs[i].shape[-1]
        base = ja - actions[..., i] * radix[i]
        idx = base[..., None] + np.arange(A) * radix[i]                 # Q(h, ·, a_{-i})
        row = np.take_along_axis(q_all, idx, axis=-1)
        chosen = np.take_along_axis(row, actions[..., i:i + 1], axis=-1)[..., 0]
        out[..., i] = chosen - (probs[i] * row).sum(axis=-1)
    return out


def mappo_actor_loss(ratio, advantage, epsilon: float) -> Tensor:
    """Clipped surrogate ``min(r A, clip(r, 1-ε, 1+ε) A)`` (to be maximized), elementwise."""
    ratio = as_tensor(ratio)
    if np.any(ratio.data <= 0.0):
        raise NumericError("probability ratio must be positive", op="mappo_actor_loss")
    adv = np.asarray(advantage.data if isinstance(advantage, Tensor) else advantage, dtype=np.float64)
    return T.minimum(ratio * adv, T.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv)


def mappo_critic_loss(v_new, v_old, target, epsilon: float, clip: bool = True) -> Tensor:
    """``max[(V - R)², (clip(V, V_old - ε, V_old + ε) - R)²]``, or the plain squared error."""
    v_new = as_tensor(v_new)
    target = np.asarray(target, dtype=np.float64)
    plain = T.square(v_new - target)
    if not clip:
        return plain
    v_old = np.asarray(v_old.data if isinstance(v_old, Tensor) else v_old, dtype=np.float64)
    clipped = T.square(T.clip(v_new, v_old - epsilon, v_old + epsilon) - target)
    return T.maximum(plain, clipped)


def policy_entropy(log_probs: Tensor) -> Tensor:
    return -T.tsum(T.exp(log_probs) * log_probs, axis=-1)
