import json

import numpy as np
import pytest
import yaml

from ctdelab.autodiff import checkpoint
from ctdelab.critic import ACConfig, ActorCriticNets
from ctdelab.envs import make_env
from ctdelab.errors import AlignmentError, ConfigError, DimensionError
from ctdelab.harness.cli import main
from ctdelab.harness.config import ExperimentConfig, coerce_scalar, load_config
from ctdelab.harness.rng import make_streams, stream
from ctdelab.harness.runner import emit_plotdata, evaluate, metrics_text, run


def _write(tmp_path, name="cfg.yaml", **overrides):
    data = {"env": "m1", "algorithm": "vdn", "seeds": [0, 1], "episodes": 60, "eval_every": 20,
            "params": {"episodes_per_iter": 4, "batch_episodes": 8, "hidden": 8, "embed": 8},
            "out": str(tmp_path / "runs"), "name": "unit"}
    data.update(overrides)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


# --- configuration ------------------------------------------------------------------------------

@pytest.mark.parametrize("text,value", [("1e-3", 1e-3), ("-2.5E+2", -250.0), ("abc", "abc"), ("1e", "1e")])
def test_coerce_scalar(text, value):
    assert coerce_scalar(text) == value


def test_yaml_exponent_floats_are_numbers(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("env: m1\nalgorithm: ia2cc\nparams:\n  critic_lr: 1e-3\n")
    assert load_config(path).params["critic_lr"] == 1e-3


@pytest.mark.parametrize("bad,field", [({"algorithm": "dqn"}, "algorithm"), ({"env": "nowhere"}, "env"),
                                       ({"seeds": [1, 1]}, "seeds"), ({"seeds": []}, "seeds"),
                                       ({"episodes": 0}, "episodes"), ({"params": {"lrr": 1}}, "params.lrr"),
                                       ({"colour": "red"}, "colour")])
def test_config_validation_names_the_field(bad, field):
    data = {"env": "m1", "algorithm": "vdn", **bad}
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(data)
    assert exc.value.field == field


def test_continuous_algorithm_needs_continuous_env():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"env": "m1", "algorithm": "maddpg-lite"})
    ExperimentConfig.from_dict({"env": "sum-game", "algorithm": "maddpg-lite"})


def test_streams_are_independent_and_replayable():
    a, b = make_streams(3), make_streams(3)
    for role in a:
        assert a[role].random() == b[role].random()
    draws = {role: g.random() for role, g in make_streams(3).items()}
    assert len(set(draws.values())) == len(draws)
    assert stream(3, "env").random() != stream(4, "env").random()
    assert stream(3, "env", 1).random() != stream(3, "env", 0).random()


# --- runs ---------------------------------------------------------------------------------------------

def test_runs_are_byte_identical(tmp_path):
    cfg = load_config(_write(tmp_path))
    first = [r.metrics.read_bytes() for r in run(cfg, out=tmp_path / "a")]
    second = [r.metrics.read_bytes() for r in run(cfg, out=tmp_path / "b")]
    threaded = [r.metrics.read_bytes() for r in run(cfg, out=tmp_path / "c", jobs=2)]
    assert first == second == threaded
    for a, b in zip(sorted((tmp_path / "a").rglob("checkpoint.ctdl")), sorted((tmp_path / "c").rglob("*.ctdl"))):
        assert a.read_bytes() == b.read_bytes()


def test_metrics_layout(tmp_path):
    runs = run(load_config(_write(tmp_path)), out=tmp_path)
    lines = runs[0].metrics.read_text().splitlines()
    assert lines[0] == "algorithm,seed,episode,mc_return,mc_se,exact_value,loss"
    episodes = [int(line.split(",")[2]) for line in lines[1:]]
    assert episodes == [20, 40, 60]


def test_seed_offset_changes_seeds(tmp_path):
    runs = run(load_config(_write(tmp_path, seeds=[0])), out=tmp_path, seed_offset=5)
    assert runs[0].seed == 5 and runs[0].directory.name == "seed5"


@pytest.mark.parametrize("algorithm", ["vdn", "ia2cc"])
def test_checkpoint_round_trip_evaluates_identically(tmp_path, algorithm):
    params = {"hidden": 8, "embed": 8}
    runs = run(load_config(_write(tmp_path, algorithm=algorithm, env="dec-tiger", params=params, seeds=[0],
                                  eval_every=0, episodes=20)), out=tmp_path)
    ckpt = runs[0].directory / "checkpoint.ctdl"
    before = evaluate(ckpt, "dec-tiger")
    assert before["value"] == runs[0].rows[-1]["exact_value"]
    copy = tmp_path / "copy.ctdl"
    checkpoint.save(copy, checkpoint.load(ckpt))
    copy.with_suffix(".json").write_text(ckpt.with_suffix(".json").read_text())
    assert evaluate(copy, "dec-tiger") == before


def test_checkpoint_dimension_mismatch(tmp_path):
    runs = run(load_config(_write(tmp_path, seeds=[0], episodes=8, eval_every=0)), out=tmp_path)
    with pytest.raises(DimensionError):
        evaluate(runs[0].directory / "checkpoint.ctdl", "dec-tiger")


def _uniform_checkpoint(tmp_path, model, env):
    cfg = ACConfig(algorithm="ia2cc", hidden=4, embed=4, critic_hidden=4)
    nets = ActorCriticNets(model, cfg, np.random.default_rng(0))
    for i in range(model.n_agents):
        head = nets.actors.net(i).head
        head.weight.data[:] = 0.0
        head.bias.data[:] = 0.0
    path = tmp_path / "uniform.ctdl"
    checkpoint.save(path, nets.state_dict())
    meta = {"format": 1, "family": "actor-critic", "algorithm": "ia2cc", "env": env, "env_params": {},
            "params": {"hidden": 4, "embed": 4, "critic_hidden": 4}, "n_agents": model.n_agents,
            "n_states": model.n_states, "n_actions": list(model.n_actions),
            "n_observations": list(model.n_observations)}
    path.with_suffix(".json").write_text(json.dumps(meta))
    return path


def test_uniform_checkpoint_on_zero_reward_env(tmp_path):
    path = _uniform_checkpoint(tmp_path, make_env("zero"), "zero")
    assert evaluate(path, "zero")["value"] == 0.0
    mc = evaluate(path, "zero", mode="monte-carlo", episodes=1000)
    assert mc["value"] == 0.0 and mc["stderr"] == 0.0


def test_exact_and_monte_carlo_modes_agree(tmp_path):
    path = _uniform_checkpoint(tmp_path, make_env("dec-tiger"), "dec-tiger")
    exact = evaluate(path, "dec-tiger")["value"]
    mc = evaluate(path, "dec-tiger", mode="monte-carlo", episodes=100_000, seed=2)
    assert abs(mc["value"] - exact) <= 4 * mc["stderr"]


def test_deterministic_env_has_zero_variance(tmp_path):
    runs = run(load_config(_write(tmp_path, seeds=[0], episodes=8, eval_every=0)), out=tmp_path)
    mc = evaluate(runs[0].directory / "checkpoint.ctdl", "m1", mode="monte-carlo", episodes=500)
    assert mc["stderr"] == 0.0


# --- plot data ---------------------------------------------------------------------------------------

def _metrics(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text(metrics_text([{"algorithm": "vdn", "seed": s, "episode": e, "exact_value": v}
                                  for s, e, v in rows]))
    return path


def test_plotdata_mean_and_stderr(tmp_path):
    a = _metrics(tmp_path, "a.csv", [(0, 10, 1.0)])
    b = _metrics(tmp_path, "b.csv", [(1, 10, 3.0)])
    lines = emit_plotdata([a, b]).splitlines()
    assert lines[1] == "vdn,10,2.0,1.0,2"


def test_plotdata_single_and_identical_seeds(tmp_path):
    a = _metrics(tmp_path, "a.csv", [(0, 10, 1.0), (0, 20, 2.0)])
    assert [line.split(",")[3] for line in emit_plotdata([a]).splitlines()[1:]] == ["0.0", "0.0"]
    b = _metrics(tmp_path, "b.csv", [(1, 10, 1.0), (1, 20, 2.0)])
    assert [line.split(",")[3] for line in emit_plotdata([a, b]).splitlines()[1:]] == ["0.0", "0.0"]


def test_plotdata_misaligned(tmp_path):
    a = _metrics(tmp_path, "a.csv", [(0, 10, 1.0)])
    b = _metrics(tmp_path, "b.csv", [(1, 15, 1.0)])
    with pytest.raises(AlignmentError):
        emit_plotdata([a, b])
    with pytest.raises(AlignmentError):
        emit_plotdata([])


# --- command line ---------------------------------------------------------------------------------

def test_cli_run_and_plot_data(tmp_path, capsys):
    path = _write(tmp_path, seeds=[0], episodes=8, eval_every=4)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert main(["plot-data", str(tmp_path / "o"), "--out", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_text().startswith("algorithm,episode,mean,stderr,n_seeds\n")


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(_write(tmp_path, algorithm="dqn"))]) == 2
    assert main(["oracle", "grid-capture", "--param", "width=3", "--budget", "10", "--method", "exhaustive"]) == 4
    assert main(["igm-check", "8,-12;-12,0", "--local", "0,1", "--local", "0,1"]) == 1
    assert main(["igm-check", "8,-12;-12,0", "--local", "1,0", "--local", "1,0"]) == 0
    assert main(["plot-data", str(tmp_path / "missing.csv")]) == 1


def test_cli_oracle_and_envs(tmp_path, capsys):
    assert main(["oracle", "m2"]) == 0
    assert "optimal value: 8.0" in capsys.readouterr().out
    assert main(["envs", "list"]) == 0
    assert "dec-tiger" in capsys.readouterr().out
    out = tmp_path / "tiger.txt"
    assert main(["envs", "export", "dec-tiger", "--out", str(out)]) == 0
    assert main(["oracle", str(out)]) == 0
    assert "optimal value: -12.0" in capsys.readouterr().out


def test_cli_evaluate(tmp_path, capsys):
    path = _uniform_checkpoint(tmp_path, make_env("zero"), "zero")
    assert main(["evaluate", str(path), "--env", "zero"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 0.0
    assert main(["evaluate", str(path), "--env", "dec-tiger"]) == 2
