"""Command-line entry point.

Exit codes: 0 success, 2 configuration/specification error, 3 numeric error,
4 enumeration-budget error, 1 anything else raised by the library.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..core.exact import DEFAULT_BUDGET, brute_force_optimal
from ..core.model_io import format_model
from ..critic.study import critic_study, heard_left_twice, study_config
from ..envs import DESCRIPTIONS, REGISTRY, make_env
from ..errors import (AlignmentError, ConfigError, CtdeLabError, DimensionError, EnumerationBudgetError,
                      ModelIntegrityError, NumericError, SpecError)
from ..factorization.igm import additive_fit, igm_check
from .config import coerce_scalar, load_config
from .rng import make_streams
from .runner import emit_plotdata, evaluate, run

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3, 4


def _params(pairs) -> dict:
    """``key=value`` strings; values parsed as YAML scalars (numbers, booleans, lists)."""
    import yaml
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", field="--param")
        key, value = item.split("=", 1)
        out[key] = coerce_scalar(yaml.safe_load(value))
    return out


def _table(text: str) -> np.ndarray:
    """A ``.npy`` path or rows separated by ';' with comma-separated entries."""
    if text.endswith(".npy") and Path(text).is_file():
        return np.load(text)
    try:
        return np.array([[float(x) for x in row.split(",")] for row in text.split(";")])
    except ValueError:
        raise ConfigError(f"cannot parse table {text!r}", field="table") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    runs = run(cfg, out=args.out, seed_offset=args.seed_offset, jobs=args.jobs)
    for r in runs:
        last = r.rows[-1] if r.rows else {}
        print(f"seed {r.seed}: {r.metrics}  exact_value={last.get('exact_value')}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = evaluate(args.checkpoint, args.env, mode=args.mode, episodes=args.episodes, seed=args.seed,
                      env_params=_params(args.param))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_critic_study(args) -> int:
    if args.config:
        exp = load_config(args.config)
        env, env_params, params = exp.env, exp.env_params, dict(exp.params)
        seeds, episodes = [s + args.seed_offset for s in exp.seeds], exp.episodes
    else:
        env, env_params, params = args.env, _params(args.env_param), _params(args.param)
        seeds, episodes = [s + args.seed_offset for s in range(args.seeds)], args.episodes
    model = make_env(env, **env_params)
    cfg = study_config(**{**params, "episodes": episodes})
    probe = heard_left_twice(model.n_agents) if env == "dec-tiger" else None
    report = critic_study(model, cfg, seeds, make_streams, probe=probe)
    text = report.table()
    print(text, end="")
    print(f"state critic distinct values per seed: {report.distinct_state_values} (|S| = {model.n_states})")
    for row in report.history_ordering:
        print(f"{row['kind']} seed {row['seed']}: V(probe)={row['probe']!r} V(empty)={row['empty']!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "critic_study.csv").write_text(text)
    return EXIT_OK


def cmd_igm_check(args) -> int:
    joint = _table(args.joint)
    if args.local:
        locals_ = [_table(q).ravel() for q in args.local]
        source = "given"
    else:
        locals_, residual = additive_fit(joint)
        source = f"additive least-squares fit (residual {residual!r})"
    ok = igm_check(joint, locals_, tol=args.tol)
    print(f"local utilities: {source}")
    print("IGM holds" if ok else "IGM violated")
    return EXIT_OK if ok else EXIT_OTHER


def cmd_oracle(args) -> int:
    model = make_env(args.model, **_params(args.param))
    res = brute_force_optimal(model, budget=args.budget, method=args.method)
    print(f"optimal value: {float(res.value)!r}")
    print(f"policies evaluated: {res.evaluated}")
    for i, table in enumerate(res.policy.tables):
        for seq, a in sorted(table.items(), key=lambda kv: (len(kv[0]), kv[0])):
            print(f"agent {i} obs {list(seq)} -> action {a}")
    return EXIT_OK


def cmd_envs(args) -> int:
    if args.envs_cmd == "list":
        for name in REGISTRY:
            print(f"{name:14s} {DESCRIPTIONS.get(name, '')}")
        print(f"{'sum-game':14s} continuous sum-to-target game (maddpg-lite only)")
        return EXIT_OK
    text = format_model(make_env(args.name, **_params(args.param)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot_data(args) -> int:
    files = []
    for f in args.files:
        p = Path(f)
        files.extend(sorted(p.rglob("metrics.csv")) if p.is_dir() else [p])
    text = emit_plotdata(files, column=args.column)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctdelab", description="Centralized-training decentralized-execution lab")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train an experiment config for every seed")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output root (default: the config's 'out')")
    r.add_argument("--seed-offset", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(fn=cmd_run)

    e = sub.add_parser("evaluate", help="evaluate a checkpoint exactly or by Monte Carlo")
    e.add_argument("checkpoint")
    e.add_argument("--env", required=True)
    e.add_argument("--param", action="append", help="environment parameter key=value")
    e.add_argument("--mode", choices=("exact", "monte-carlo"), default="exact")
    e.add_argument("--episodes", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(fn=cmd_evaluate)

    c = sub.add_parser("critic-study", help="history vs state vs history-state critics")
    c.add_argument("--config", default=None)
    c.add_argument("--env", default="dec-tiger")
    c.add_argument("--env-param", action="append")
    c.add_argument("--param", action="append", help="actor-critic hyperparameter key=value")
    c.add_argument("--seeds", type=int, default=5)
    c.add_argument("--episodes", type=int, default=2000)
    c.add_argument("--seed-offset", type=int, default=0)
    c.add_argument("--out", default=None)
    c.set_defaults(fn=cmd_critic_study)

    g = sub.add_parser("igm-check", help="check IGM for a joint table and local utilities")
    g.add_argument("joint", help="'8,-12;-12,0' or a .npy file, indexed [a_1, a_2]")
    g.add_argument("--local", action="append", help="one per agent; default: additive least-squares fit")
    g.add_argument("--tol", type=float, default=0.0)
    g.set_defaults(fn=cmd_igm_check)

    o = sub.add_parser("oracle", help="brute-force optimal joint policy of a model")
    o.add_argument("model", help="model file or built-in environment name")
    o.add_argument("--param", action="append")
    o.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    o.add_argument("--method", choices=("best-response", "exhaustive"), default="best-response")
    o.set_defaults(fn=cmd_oracle)

    v = sub.add_parser("envs", help="list or export built-in environments")
    vs = v.add_subparsers(dest="envs_cmd", required=True)
    vs.add_parser("list")
    x = vs.add_parser("export")
    x.add_argument("name")
    x.add_argument("--param", action="append")
    x.add_argument("--out", default=None)
    v.set_defaults(fn=cmd_envs)

    d = sub.add_parser("plot-data", help="mean and standard error across seeds per evaluation episode")
    d.add_argument("files", nargs="+", help="metrics files or run directories")
    d.add_argument("--column", default="exact_value")
    d.add_argument("--out", default=None)
    d.set_defaults(fn=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SpecError, AlignmentError, DimensionError, ModelIntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EnumerationBudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CtdeLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
