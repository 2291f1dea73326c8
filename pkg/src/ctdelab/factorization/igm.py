"""Exhaustive Individual-Global-Max checks on finite tables (set-valued on ties)."""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import DimensionError

TIE_TOL = 0.0


def argmax_set(values: np.ndarray, tol: float = TIE_TOL) -> set[tuple[int, ...]]:
    """All index tuples attaining the maximum (within ``tol``)."""
    values = np.asarray(values, dtype=np.float64)
    return {tuple(int(k) for k in idx) for idx in np.argwhere(values >= values.max() - tol)}


def _validate(joint_q, locals_):
    joint_q = np.asarray(joint_q, dtype=np.float64)
    locals_ = [np.asarray(q, dtype=np.float64) for q in locals_]
    if joint_q.ndim != len(locals_):
        raise DimensionError(f"joint table has {joint_q.ndim} axes but {len(locals_)} local tables given")
    for i, q in enumerate(locals_):
        if q.ndim != 1 or q.shape[0] != joint_q.shape[i]:
            raise DimensionError(f"local table {i} has shape {q.shape}, joint axis has {joint_q.shape[i]}")
    return joint_q, locals_


def igm_check(joint_q, locals_, tol: float = TIE_TOL) -> bool:
    """True iff every combination of local argmaxes is a joint argmax.

    ``joint_q`` is indexed ``[a_1, ..., a_n]`` (one axis per agent).
    """
    joint_q, locals_ = _validate(joint_q, locals_)
    joint_best = argmax_set(joint_q, tol)
    local_best = [np.flatnonzero(q >= q.max() - tol).tolist() for q in locals_]
    return all(combo in joint_best for combo in itertools.product(*local_best))


def advantage_igm_check(joint_q, locals_, tol: float = TIE_TOL) -> bool:
    """The same set check on advantages ``A = Q - max Q`` and ``A_i = Q_i - max Q_i``."""
    joint_q, locals_ = _validate(joint_q, locals_)
    adv = joint_q - joint_q.max()
    local_adv = [q - q.max() for q in locals_]
    return igm_check(adv, local_adv, tol)


def additive_fit(joint_q) -> tuple[list[np.ndarray], float]:
    """Least-squares ``Q(a) ≈ Σ_i Q_i(a_i)`` over all joint actions; returns (locals, residual SSE)."""
    joint_q = np.asarray(joint_q, dtype=np.float64)
    shape = joint_q.shape
    cells = list(itertools.product(*[range(k) for k in shape]))
    offsets = np.concatenate([[0], np.cumsum(shape)[:-1]])
    X = np.zeros((len(cells), int(sum(shape))))
    for r, cell in enumerate(cells):
        for i, a in enumerate(cell):
            X[r, offsets[i] + a] = 1.0
    target = np.array([joint_q[c] for c in cells])
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = float(((X @ coef - target) ** 2).sum())
    return [coef[o:o + k] for o, k in zip(offsets, shape)], resid
