"""Line-oriented text format for tabular models.

Header lines::

    agents n
    states k
    actions a_1 ... a_n
    observations o_1 ... o_n
    horizon H            # integer or "inf"
    discount g
    belief p_1 ... p_k

followed by any number of ``T s ja s' p``, ``R s ja r`` and ``O ja s' jo p``
lines.  Joint indices are mixed radix with agent 1 least significant, unspecified
entries are 0 and ``#`` starts a comment.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..errors import DimensionError, ModelIntegrityError
from .model import DecPomdpModel

_HEADER = ("agents", "states", "actions", "observations", "horizon", "discount", "belief")


def _num(tok: str) -> float:
    return float(tok)


def parse_model(text: str, name: str = "model") -> DecPomdpModel:
    header: dict[str, list[str]] = {}
    entries: list[tuple[str, list[str], int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key in _HEADER:
            if key in header:
                raise ModelIntegrityError(f"line {lineno}: duplicate header '{key}'")
            header[key] = rest
        elif key in ("T", "R", "O"):
            entries.append((key, rest, lineno))
        else:
            raise ModelIntegrityError(f"line {lineno}: unknown record '{key}'")
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise ModelIntegrityError(f"missing header lines: {', '.join(missing)}")

    n = int(header["agents"][0])
    k = int(header["states"][0])
    actions = tuple(int(x) for x in header["actions"])
    observations = tuple(int(x) for x in header["observations"])
    if len(actions) != n or len(observations) != n:
        raise DimensionError("actions/observations must list one count per agent")
    h_tok = header["horizon"][0].lower()
    horizon = None if h_tok in ("inf", "infinite") else int(h_tok)
    discount = _num(header["discount"][0])
    belief = np.array([_num(x) for x in header["belief"]])
    if belief.shape != (k,):
        raise DimensionError("belief must list one probability per state")

    ja, jo = math.prod(actions), math.prod(observations)
    T = np.zeros((k, ja, k))
    R = np.zeros((k, ja))
    O = np.zeros((ja, k, jo))
    for key, rest, lineno in entries:
        try:
            if key == "T":
                s, a, s2, p = int(rest[0]), int(rest[1]), int(rest[2]), _num(rest[3])
                T[s, a, s2] = p
            elif key == "R":
                s, a, r = int(rest[0]), int(rest[1]), _num(rest[2])
                R[s, a] = r
            else:
                a, s2, o, p = int(rest[0]), int(rest[1]), int(rest[2]), _num(rest[3])
                O[a, s2, o] = p
        except (IndexError, ValueError) as exc:
            raise DimensionError(f"line {lineno}: malformed {key} record ({exc})") from None
    return DecPomdpModel(actions, observations, T, R, O, belief, horizon, discount, name=name)


def format_model(model: DecPomdpModel) -> str:
    lines = [
        f"# {model.name}",
        f"agents {model.n_agents}",
        f"states {model.n_states}",
        "actions " + " ".join(map(str, model.n_actions)),
        "observations " + " ".join(map(str, model.n_observations)),
        f"horizon {'inf' if model.horizon is None else model.horizon}",
        f"discount {model.discount!r}",
        "belief " + " ".join(repr(float(p)) for p in model.initial_belief),
    ]
    for s, a, s2 in zip(*np.nonzero(model.transition)):
        lines.append(f"T {s} {a} {s2} {float(model.transition[s, a, s2])!r}")
    for s, a in zip(*np.nonzero(model.reward)):
        lines.append(f"R {s} {a} {float(model.reward[s, a])!r}")
    for a, s2, o in zip(*np.nonzero(model.observation)):
        lines.append(f"O {a} {s2} {o} {float(model.observation[a, s2, o])!r}")
    return "\n".join(lines) + "\n"


def load_model(path) -> DecPomdpModel:
    path = Path(path)
    return parse_model(path.read_text(), name=path.stem)


def save_model(model: DecPomdpModel, path) -> None:
    Path(path).write_text(format_model(model))
