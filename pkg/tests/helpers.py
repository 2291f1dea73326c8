"""Builders shared by the unit and acceptance tests."""
import numpy as np

from ctdelab.factorization import FactorizationNets
from ctdelab.factorization import losses as vf_losses
from ctdelab.rollout import collect


def small_nets(algorithm, model, seed=0, **kw):
    opts = dict(embed=6, hidden=5, mixer_embed=4, head_hidden=6)
    opts.update(kw)
    return FactorizationNets(algorithm, model.n_observations, model.n_actions, model.n_states,
                             np.random.default_rng(seed), **opts)


def random_batch(model, episodes=4, seed=1):
    rng = np.random.default_rng(seed)

    def act(t, last_obs, last_act):
        return np.stack([rng.integers(0, k, size=episodes) for k in model.n_actions], axis=-1)
    return collect(model, episodes, act, rng)


def with_frozen_calls(owner, name, fn):
    """Wrap ``fn`` so ``owner.name(...)`` returns its first-call results on every later call.

    Several losses feed gradient-stopped features (joint-history encodings) into
    a head.  A finite difference through the producing network would see a path
    the analytic gradient deliberately drops, so the check holds those features
    at their unperturbed values.  Calls are matched by their order within ``fn``.
    """
    cache = []

    def wrapped():
        original = getattr(owner, name)
        own = name in vars(owner)
        seen = [0]

        def replay(*args, **kwargs):
            k = seen[0]
            seen[0] += 1
            if k == len(cache):
                cache.append(original(*args, **kwargs))
            return cache[k]

        setattr(owner, name, replay)
        try:
            return fn()
        finally:
            if own:
                setattr(owner, name, original)
            else:
                delattr(owner, name)
    return wrapped


def with_frozen_history_features(fn):
    """QTRAN reads joint-history features through the module-level ``_hist``."""
    return with_frozen_calls(vf_losses, "_hist", fn)


def force_head(bank, agent, values):
    """Make agent ``agent``'s utilities the constant row ``values`` for every history."""
    head = bank.net(agent).head
    head.weight.data[:] = 0.0
    head.bias.data[:] = values


# acceptance criterion -> [(check, passed, detail)], printed at the end of the session
CRITERIA: dict = {}


def record(criterion: int, check: str, passed: bool, detail: str) -> bool:
    CRITERIA.setdefault(criterion, []).append((check, bool(passed), detail))
    print(f"criterion {criterion} [{check}]: {'PASS' if passed else 'FAIL'} ({detail})")
    return passed
