"""Run experiments per seed, write metrics/checkpoints, evaluate checkpoints, aggregate curves.

Per seed the run directory holds::

    metrics.csv       fixed header, floats written with repr (deterministic bytes)
    timing.csv        wall-clock per metrics row (kept apart so metrics stay byte-identical)
    checkpoint.ctdl   parameters in the binary checkpoint layout
    checkpoint.json   what is needed to rebuild the networks
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import checkpoint
from ..core.exact import exact_policy_value, monte_carlo_value
from ..core.model import DecPomdpModel
from ..critic.maddpg import DeterministicActor, JointActionCritic, SumGameSpec, policy_return, train_maddpg
from ..critic.train import ACConfig, ActorCriticNets, stochastic_policy, train_actor_critic
from ..envs import make_env
from ..errors import AlignmentError, ConfigError, DimensionError
from ..factorization.train import VFConfig, build_nets, greedy_policy, train_value_factorization
from .config import ExperimentConfig, family
from .rng import make_streams, stream

METRICS_HEADER = ("algorithm", "seed", "episode", "mc_return", "mc_se", "exact_value", "loss")
TIMING_HEADER = ("seed", "episode", "wall_clock")
FORMAT_VERSION = 1


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(METRICS_HEADER) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row.get(k)) for k in METRICS_HEADER) + "\n")
    return buf.getvalue()


def build_model(cfg: ExperimentConfig):
    if family(cfg.algorithm) == "continuous":
        return SumGameSpec(**cfg.env_params)
    return make_env(cfg.env, **cfg.env_params)


def _row(algorithm: str, seed: int, episode: int, raw: dict, loss_key: str) -> dict:
    return {"algorithm": algorithm, "seed": seed, "episode": episode, "mc_return": raw.get("mc_return"),
            "mc_se": raw.get("mc_se"), "exact_value": raw.get("exact_value"), "loss": raw.get(loss_key)}


@dataclass
class SeedRun:
    seed: int
    directory: Path
    metrics: Path
    rows: list


def run_seed(cfg: ExperimentConfig, seed: int, directory: Path) -> SeedRun:
    """Train one seed end to end and write its files into ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    fam = family(cfg.algorithm)
    model = build_model(cfg)
    algo = cfg.algo_config()
    streams = make_streams(seed)
    rows, times = [], []
    start = time.perf_counter()

    if fam == "continuous":
        def on_row(raw):
            raw = {**raw, "exact_value": raw["return"], "mc_return": raw["return"], "mc_se": 0.0}
            rows.append(_row(cfg.algorithm, seed, raw["step"], raw, "critic_loss"))
            times.append(time.perf_counter() - start)
        result = train_maddpg(model, algo, streams, callback=on_row)
        params = OrderedDict()
        for i, mu in enumerate(result.actors):
            params.update((f"actor{i}.{k}", v) for k, v in mu.state_dict().items())
        params.update((f"critic.{k}", v) for k, v in result.critic.state_dict().items())
        meta = {"n_agents": model.n_agents, "horizon": model.horizon}
    else:
        if fam == "value":
            def on_row(raw):
                rows.append(_row(cfg.algorithm, seed, raw["episode"], raw, "loss"))
                times.append(time.perf_counter() - start)
            result = train_value_factorization(model, algo, streams, callback=on_row)
        else:
            def on_row(raw):
                rows.append(_row(cfg.algorithm, seed, raw["episode"], raw, "critic_loss"))
                times.append(time.perf_counter() - start)
            result = train_actor_critic(model, algo, streams, callback=on_row)
        params = result.nets.state_dict()
        meta = {"n_agents": model.n_agents, "n_states": model.n_states,
                "n_actions": list(model.n_actions), "n_observations": list(model.n_observations)}

    metrics_path = directory / "metrics.csv"
    metrics_path.write_text(metrics_text(rows))
    with open(directory / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for row, t in zip(rows, times):
            w.writerow([seed, row["episode"], f"{t:.6f}"])
    checkpoint.save(directory / "checkpoint.ctdl", params)
    info = {"format": FORMAT_VERSION, "family": fam, "algorithm": cfg.algorithm, "env": cfg.env,
            "env_params": cfg.env_params, "params": cfg.params, "episodes": cfg.episodes, "seed": seed, **meta}
    (directory / "checkpoint.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return SeedRun(seed, directory, metrics_path, rows)


def run(cfg: ExperimentConfig, out: str | Path | None = None, seed_offset: int = 0, jobs: int = 1) -> list[SeedRun]:
    """Execute ``cfg`` for every seed; seeds fan out over ``jobs`` worker threads."""
    cfg.validate()
    root = Path(out if out is not None else cfg.out) / cfg.name
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    seeds = [s + seed_offset for s in cfg.seeds]
    tasks = [(s, root / f"seed{s}") for s in seeds]
    if jobs <= 1 or len(tasks) == 1:
        return [run_seed(cfg, s, d) for s, d in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_seed, cfg, s, d) for s, d in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# checkpoints

def _split(params, prefix: str) -> OrderedDict:
    return OrderedDict((k[len(prefix):], v) for k, v in params.items() if k.startswith(prefix))


def load_checkpoint(path, model: DecPomdpModel | SumGameSpec):
    """Rebuild the trained networks from ``path`` (and its ``.json`` sidecar) for ``model``."""
    path = Path(path)
    meta_path = path.with_suffix(".json")
    if not meta_path.is_file():
        raise ConfigError(f"missing checkpoint metadata {meta_path}", field="checkpoint")
    meta = json.loads(meta_path.read_text())
    params = checkpoint.load(path)
    fam = meta["family"]
    rng = np.random.default_rng(0)                   # overwritten by the stored parameters
    if fam == "continuous":
        if not isinstance(model, SumGameSpec) or \
                (model.n_agents, model.horizon) != (meta["n_agents"], meta["horizon"]):
            raise DimensionError("checkpoint was trained on a different continuous game")
        hidden = dict(meta["params"]).get("hidden", 32)
        actors = []
        for i in range(model.n_agents):
            mu = DeterministicActor(model.horizon, rng, hidden)
            mu.load_state_dict(_split(params, f"actor{i}."))
            actors.append(mu)
        critic = JointActionCritic(model.horizon, model.n_agents, rng, hidden)
        critic.load_state_dict(_split(params, "critic."))
        return meta, (actors, critic)
    if not isinstance(model, DecPomdpModel):
        raise DimensionError("a tabular model is required for this checkpoint")
    dims = [model.n_agents, model.n_states, list(model.n_actions), list(model.n_observations)]
    stored = [meta["n_agents"], meta["n_states"], meta["n_actions"], meta["n_observations"]]
    if dims != stored:
        raise DimensionError(f"checkpoint dimensions {stored} do not match the environment {dims}")
    kw = {k: v for k, v in meta["params"].items()}
    if fam == "value":
        nets = build_nets(model, VFConfig(algorithm=meta["algorithm"], **kw), rng)
    else:
        nets = ActorCriticNets(model, ACConfig(algorithm=meta["algorithm"], **kw), rng)
    nets.load_state_dict(params)
    return meta, nets


def extract_policy(meta: dict, nets, model: DecPomdpModel):
    """Greedy policy for value methods, the stochastic policy for policy-gradient methods."""
    if meta["family"] == "value":
        return greedy_policy(nets, model)
    return stochastic_policy(nets.actors, model)


def evaluate(checkpoint_path, env: str | DecPomdpModel | SumGameSpec, mode: str = "exact",
             episodes: int = 100_000, seed: int = 0, env_params: dict | None = None) -> dict:
    """Value of the policy stored in a checkpoint, exactly or by ``episodes`` Monte-Carlo rollouts."""
    if mode not in ("exact", "monte-carlo"):
        raise ConfigError(f"unknown evaluation mode {mode!r}", field="mode")
    if isinstance(env, str):
        env = SumGameSpec(**(env_params or {})) if env == "sum-game" else make_env(env, **(env_params or {}))
    meta, nets = load_checkpoint(checkpoint_path, env)
    report = {"algorithm": meta["algorithm"], "mode": mode}
    if meta["family"] == "continuous":
        value = policy_return(env, nets[0])
        report.update(value=value, stderr=0.0, episodes=episodes if mode == "monte-carlo" else None)
        return report
    policy = extract_policy(meta, nets, env)
    if mode == "exact":
        report.update(value=float(exact_policy_value(env, policy)), stderr=0.0, episodes=None)
    else:
        if episodes < 1:
            raise ConfigError("episodes must be positive", field="episodes")
        mean, se = monte_carlo_value(env, policy, episodes, stream(seed, "eval"))
        report.update(value=mean, stderr=se, episodes=episodes)
    return report


# ---------------------------------------------------------------------------
# plot data

def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plotdata(files, column: str = "exact_value") -> str:
    """Per algorithm and episode: mean and standard error of ``column`` across seeds.

    Every seed of an algorithm must report the same episodes; the standard error
    is ``std(ddof=1) / sqrt(n)`` and 0 for a single seed.
    """
    files = list(files)
    if not files:
        raise AlignmentError("no metrics files given")
    curves: dict = {}
    for path in files:
        rows = read_metrics(path)
        if rows and column not in rows[0]:
            raise ConfigError(f"column {column!r} not in {path}", field="column")
        for row in rows:
            if row[column] == "":
                continue
            per_seed = curves.setdefault(row["algorithm"], {}).setdefault(row["seed"], {})
            per_seed[int(row["episode"])] = float(row[column])
    if not curves:
        raise AlignmentError(f"no values in column {column!r}")
    lines = ["algorithm,episode,mean,stderr,n_seeds"]
    for algorithm in sorted(curves):
        seeds = curves[algorithm]
        episodes = [sorted(v) for v in seeds.values()]
        if any(e != episodes[0] for e in episodes):
            raise AlignmentError(f"{algorithm}: seeds report different evaluation episodes")
        for ep in episodes[0]:
            vals = np.array([seeds[s][ep] for s in seeds])
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            lines.append(f"{algorithm},{ep},{float(vals.mean())!r},{se!r},{len(vals)}")
    return "\n".join(lines) + "\n"
