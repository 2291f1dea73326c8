"""Counter-based random streams keyed by (master seed, role, index).

Each stream is a Philox generator seeded from ``SeedSequence(seed,
spawn_key=(role_id, index))``, so streams for different roles or episodes never
overlap and any one of them can be regenerated without replaying the others.
"""
from __future__ import annotations

import numpy as np

ROLES = ("init", "env", "explore", "replay", "eval")
ROLE_IDS = {role: k for k, role in enumerate(ROLES)}


def stream(seed: int, role: str, index: int = 0) -> np.random.Generator:
    if role not in ROLE_IDS:
        raise KeyError(f"unknown stream role {role!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(ROLE_IDS[role], int(index)))
    return np.random.Generator(np.random.Philox(ss))


def make_streams(seed: int, index: int = 0) -> dict[str, np.random.Generator]:
    """One generator per role for run ``index`` of ``seed``."""
    return {role: stream(seed, role, index) for role in ROLES}
