from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


def gradcheck(fn: Callable[[], Tensor], params, probes: int = 100, step: float = 1e-6,
              rng: np.random.Generator | None = None) -> float:
    """Max over random coordinates of ``|analytic - numeric| / max(1, |numeric|)``.

    ``fn`` rebuilds the scalar objective from the current values of ``params``;
    numeric derivatives are central differences with the given step.
    """
    params = list(params.values()) if isinstance(params, dict) else list(params)
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params:
        p.zero_grad()
    out = fn()
    if out.data.size != 1 or not np.isfinite(out.data).all():
        raise NumericError("objective must be a finite scalar", op="gradcheck")
    out.backward()
    analytic = [p.grad.copy() for p in params]
    sizes = np.array([p.data.size for p in params], dtype=float)
    worst = 0.0
    for _ in range(probes):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        flat = params[k].data.reshape(-1)
        j = int(rng.integers(flat.size))
        orig = flat[j]
        flat[j] = orig + step
        up = float(fn().data)
        flat[j] = orig - step
        down = float(fn().data)
        flat[j] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError("objective not finite at probe", op="gradcheck")
        numeric = (up - down) / (2.0 * step)
        a = float(analytic[k].reshape(-1)[j])
        worst = max(worst, abs(a - numeric) / max(1.0, abs(numeric)))
    return worst
