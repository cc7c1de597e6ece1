import csv
import statistics

import numpy as np
import pytest

from seqdac.harness import config as cfgmod
from seqdac.harness.cli import (
    EVAL_SCHEMA,
    TRAIN_SCHEMA,
    RunError,
    cmd_compare,
    cmd_eval,
    cmd_train,
    competition_ranks,
    main,
    read_train_csv,
    write_train_csv,
)
from seqdac.harness.config import ConfigError
from seqdac.harness.runner import EvalRow, evaluate, train
from seqdac.learners import SadnLearner
from seqdac.mmdp import ConstantEnv

TINY_SIGMOID = """
learner = sadn
env = sigmoid
variant = seq-mask
H = 2
T = 4
total_steps = 300
eval_interval = 100
eval_episodes = 3
warmup = 50
batch_size = 8
hidden_dim = 8
seeds = 0, 1
"""


def write(path, text):
    path.write_text(text)
    return path


# -- config


def test_defaults_reproduce_hyperparameter_table():
    lc = cfgmod.loads("").learner_config
    assert (lc.lr, lc.batch_size, lc.gamma, lc.target_interval, lc.grad_clip, lc.hidden_dim) == (
        1e-4, 32, 0.99, 200, 10.0, 64,
    )


def test_include_and_override(tmp_path):
    write(tmp_path / "base.cfg", "learner = vdn\nH = 3\nlr = 0.01  # comment\n")
    sub = tmp_path / "sub"
    sub.mkdir()
    write(sub / "run.cfg", "include ../base.cfg\nH = 4\n")
    cfg = cfgmod.load(sub / "run.cfg", {"seeds": "3,4"})
    assert (cfg.learner, cfg.H, cfg.seeds, cfg.learner_config.lr) == ("vdn", 4, (3, 4), 0.01)


def test_snapshot_round_trip(tmp_path):
    cfg = cfgmod.loads(TINY_SIGMOID, {"agent_order": "reverse"})
    path = write(tmp_path / "snap.cfg", cfg.to_text())
    assert cfgmod.load(path) == cfg


@pytest.mark.parametrize(
    "text",
    ["learner = qmix", "nonsense = 1", "H = two", "variant = seq-huge", "agent_order = 0 0", "seeds =", "no equals sign"],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        cfgmod.loads(text)


def test_include_cycle(tmp_path):
    write(tmp_path / "a.cfg", "include b.cfg\n")
    write(tmp_path / "b.cfg", "include a.cfg\n")
    with pytest.raises(ConfigError, match="cycle"):
        cfgmod.load(tmp_path / "a.cfg")


# -- runner


def test_evaluation_never_updates_learner():
    env = ConstantEnv(horizon=3)
    learner = SadnLearner(1, (2, 2), rng=np.random.default_rng(0))
    before = learner.adv_params.copy()
    evaluate(learner.policy(0.0), env, 4, seed=0, metric="return")
    np.testing.assert_array_equal(learner.adv_params, before)
    assert learner.updates == 0


def test_train_schedule_rows():
    env = ConstantEnv(horizon=5)
    cfg = cfgmod.loads("warmup = 10\nbatch_size = 4\nhidden_dim = 4").learner_config
    learner = SadnLearner(1, (2, 2), cfg, rng=np.random.default_rng(0))
    rows = train(learner, env, 50, seed=0, eval_interval=20, eval_episodes=2)
    assert [r.step for r in rows] == [0, 20, 40, 50]
    assert all(r.mean == 2.5 for r in rows)
    assert learner.updates == 50 - 10 + 1


# -- train


def test_train_zero_steps(tmp_path):
    cfg = cfgmod.loads(TINY_SIGMOID, {"total_steps": "0", "seeds": "0"})
    out = cmd_train(cfg, tmp_path / "run")
    assert (out / "config.cfg").is_file() and (out / "seed_0" / "checkpoint").is_dir()
    rows = read_train_csv(out / "seed_0" / "train.csv")
    assert [r["step"] for r in rows] == [0]
    assert (out / "seed_0" / "train.csv").read_text().splitlines()[:2] == [TRAIN_SCHEMA, "step,eval_mean,eval_std,episodes"]


def test_train_is_byte_identical(tmp_path):
    cfg = cfgmod.loads(TINY_SIGMOID)
    a = cmd_train(cfg, tmp_path / "a")
    b = cmd_train(cfg, tmp_path / "b", jobs=2)
    for s in (0, 1):
        assert (a / f"seed_{s}" / "train.csv").read_bytes() == (b / f"seed_{s}" / "train.csv").read_bytes()
        for f in (a / f"seed_{s}" / "checkpoint").iterdir():
            assert f.read_bytes() == (b / f"seed_{s}" / "checkpoint" / f.name).read_bytes()
    assert (a / "seed_0" / "train.csv").read_bytes() != (a / "seed_1" / "train.csv").read_bytes()


def test_train_csv_rejects_other_schema(tmp_path):
    path = tmp_path / "t.csv"
    write_train_csv(path, [EvalRow(0, 1.0, 0.0, 1, (1.0,))])
    path.write_text(path.read_text().replace("train/1", "train/9"))
    with pytest.raises(RunError):
        read_train_csv(path)


# -- eval


def test_eval_constant_env_is_horizon_times_reward(tmp_path):
    cfg = cfgmod.loads("env = constant\nreward = 0.25\nhorizon = 8\ntotal_steps = 0")
    run = cmd_train(cfg, tmp_path / "run")
    rows = cmd_eval(run / "seed_0" / "checkpoint", cfg, 3, 0, tmp_path / "e.csv")
    assert [r["return"] for r in rows] == [2.0, 2.0, 2.0]
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == EVAL_SCHEMA and lines[1] == "episode,return" and lines[-2] == "mean,2.0"


def test_eval_moead_schema_and_repeatability(tmp_path):
    cfg = cfgmod.loads("env = moead\nN = 20\nT_episode = 2\ntotal_steps = 0\neval_episodes = 1")
    run = cmd_train(cfg, tmp_path / "run")
    ck = run / "seed_0" / "checkpoint"
    cmd_eval(ck, cfg, 2, 5, tmp_path / "a.csv")
    cmd_eval(ck, cfg, 2, 5, tmp_path / "b.csv")
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()[1:]))
    assert list(rows[0]) == ["episode", "return", "final_igd"]
    assert all(float(r["final_igd"]) > 0 for r in rows)


def test_eval_dimension_mismatch_names_both_shapes(tmp_path):
    cfg = cfgmod.loads("env = constant\ntotal_steps = 0")
    run = cmd_train(cfg, tmp_path / "run")
    other = cfgmod.loads("env = constant\naction_sizes = 2, 3")
    with pytest.raises(RunError, match=r"action_sizes=\(2, 2\).*action_sizes=\(2, 3\)"):
        cmd_eval(run / "seed_0" / "checkpoint", other, 1, 0)


# -- compare


def fake_run(root, name, learner, finals, env="constant"):
    """Run directory with a snapshot and one-row train.csv per seed."""
    d = root / name
    d.mkdir()
    seeds = ", ".join(str(s) for s in range(len(finals)))
    cfg = cfgmod.loads(f"learner = {learner}\nenv = {env}\nseeds = {seeds}")
    (d / "config.cfg").write_text(cfg.to_text())
    for s, v in enumerate(finals):
        (d / f"seed_{s}").mkdir()
        write_train_csv(d / f"seed_{s}" / "train.csv", [EvalRow(0, 0.0, 0.0, 1, (0.0,)), EvalRow(10, v, 0.0, 1, (v,))])
    return d


def test_competition_ranks():
    assert competition_ranks([1.0, 3.0, 3.0, 2.0], lower_is_better=False) == [4, 1, 1, 3]
    assert competition_ranks([1.0, 3.0, 3.0, 2.0], lower_is_better=True) == [1, 3, 3, 2]


def test_compare_identical_runs_tie(tmp_path, capsys):
    a = fake_run(tmp_path, "a", "sadn", [1.0, 2.0])
    b = fake_run(tmp_path, "b", "sadn", [1.0, 2.0])
    table = cmd_compare([a, b])
    assert table[0]["mean"] == table[1]["mean"] and [r["rank"] for r in table] == [1, 1]
    assert "rank" in capsys.readouterr().out


def test_compare_three_learners_recomputed_independently(tmp_path):
    runs = [
        fake_run(tmp_path, "sadn", "sadn", [0.3, 0.7, 1.1]),
        fake_run(tmp_path, "vdn", "vdn", [0.2, 0.1, 0.4]),
        fake_run(tmp_path, "ace", "ace", [0.9, 0.5, 0.6]),
    ]
    cmd_compare(runs, tmp_path / "cmp.csv")
    lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert lines[0] == "# schema: seqdac-compare/1"
    table = list(csv.DictReader(lines[1:]))
    assert sorted(int(r["rank"]) for r in table) == [1, 2, 3]
    for row, run in zip(table, runs):
        raw = []
        for s in range(3):
            with open(run / f"seed_{s}" / "train.csv") as fh:
                raw.append(float(list(csv.reader(fh))[-1][1]))
        assert abs(float(row["mean"]) - statistics.fmean(raw)) <= 1e-12
        assert abs(float(row["std"]) - statistics.pstdev(raw)) <= 1e-12


def test_compare_rejects_mismatched_envs(tmp_path):
    a = fake_run(tmp_path, "a", "sadn", [1.0])
    b = fake_run(tmp_path, "b", "sadn", [1.0], env="sigmoid")
    with pytest.raises(RunError, match="mismatch"):
        cmd_compare([a, b])
    with pytest.raises(RunError):
        cmd_compare([a])


# -- entry point


def test_main_exit_codes(tmp_path, capsys):
    good = write(tmp_path / "good.cfg", "env = constant\ntotal_steps = 0\n")
    assert main(["train", str(good), "--out", str(tmp_path / "r")]) == 0
    bad = write(tmp_path / "bad.cfg", "bogus = 1\n")
    assert main(["train", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert main(["train", str(good), "--out", str(tmp_path / "y"), "--set", "H"]) == 1
    assert main(["eval", str(tmp_path / "missing"), "--config", str(good)]) == 2
    assert main(["compare", str(tmp_path / "r"), str(tmp_path / "nope")]) == 2
    assert "error" in capsys.readouterr().err


def test_bench_runs_all_checks(capsys):
    assert main(["bench", "--episodes", "2"]) == 0
    out = capsys.readouterr().out
    assert out.count(" ok") == 6
    assert main(["bench", "--env", "nope"]) == 1


def test_shipped_configs_parse():
    from pathlib import Path

    shipped = sorted((Path(__file__).parents[1] / "configs").glob("*.cfg"))
    assert shipped
    for path in shipped:
        cfgmod.load(path)
