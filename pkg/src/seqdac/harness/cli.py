"""``seqdac`` command line: train, eval, compare, bench.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..learners import load_learner, make_learner
from ..mmdp import EnvDoneError, run_episode
from . import config as cfgmod
from .config import ConfigError, RunConfig
from .runner import EvalRow, train

log = logging.getLogger("seqdac")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

TRAIN_SCHEMA = "# schema: seqdac-train/1"
EVAL_SCHEMA = "# schema: seqdac-eval/1"
COMPARE_SCHEMA = "# schema: seqdac-compare/1"
TRAIN_COLUMNS = ("step", "eval_mean", "eval_std", "episodes")
SNAPSHOT = "config.cfg"


class RunError(RuntimeError):
    """A run could not be completed or its outputs are inconsistent."""


def _fmt(x: float) -> str:
    return repr(float(x))


# -- train ------------------------------------------------------------------------------------


def write_train_csv(path: Path, rows: list[EvalRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRAIN_SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAIN_COLUMNS)
        for r in rows:
            w.writerow([r.step, _fmt(r.mean), _fmt(r.std), r.episodes])


def read_train_csv(path) -> list[dict]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise RunError(f"{path}: missing schema line")
    if lines[0] != TRAIN_SCHEMA:
        raise RunError(f"{path}: unsupported schema {lines[0]!r}")
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != TRAIN_COLUMNS:
        raise RunError(f"{path}: unexpected columns {reader.fieldnames}")
    return [
        {"step": int(r["step"]), "eval_mean": float(r["eval_mean"]), "eval_std": float(r["eval_std"]),
         "episodes": int(r["episodes"])}
        for r in reader
    ]


def build_learner(cfg: RunConfig, env, seed: int):
    rng = np.random.default_rng([seed, 1])
    return make_learner(
        cfg.learner, env.state_dim, env.action_sizes, cfg.learner_config, rng, cfg.order(env.n_agents)
    )


def train_seed(cfg: RunConfig, seed: int, seed_dir) -> list[EvalRow]:
    """Train one seed, writing ``train.csv`` and ``checkpoint/`` under ``seed_dir``."""
    seed_dir = Path(seed_dir)
    seed_dir.mkdir(parents=True, exist_ok=True)
    env = cfg.make_env()
    learner = build_learner(cfg, env, seed)
    rows = train(
        learner,
        env,
        cfg.total_steps,
        seed=seed,
        eval_interval=cfg.eval_interval,
        eval_episodes=cfg.eval_episodes,
        eval_seed=cfg.eval_seed,
        metric=cfg.metric,
    )
    write_train_csv(seed_dir / "train.csv", rows)
    learner.save(seed_dir / "checkpoint")
    return rows


def _train_job(args):
    cfg, seed, seed_dir = args
    train_seed(cfg, seed, seed_dir)
    return seed


def cmd_train(cfg: RunConfig, out: Path, jobs: int = 1) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    (out / SNAPSHOT).write_text(cfg.to_text())
    tasks = [(cfg, s, out / f"seed_{s}") for s in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        # seeds are independent; each worker owns its env, learner and rngs
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for seed in pool.map(_train_job, tasks):
                log.info("seed %d done", seed)
    else:
        for t in tasks:
            _train_job(t)
    return out


# -- eval --------------------------------------------------------------------------------------


def cmd_eval(checkpoint, cfg: RunConfig, episodes: int, seed: int, out=None) -> list[dict]:
    learner = load_learner(checkpoint)
    env = cfg.make_env()
    want = (env.state_dim, tuple(env.action_sizes))
    have = (learner.state_dim, tuple(learner.env_action_sizes))
    if want != have:
        raise RunError(
            f"checkpoint shape (state_dim={have[0]}, action_sizes={have[1]}) does not match "
            f"environment (state_dim={want[0]}, action_sizes={want[1]})"
        )
    policy = learner.policy(epsilon=0.0)
    rng = np.random.default_rng(seed)
    columns = ["episode", "return"] + (["final_igd"] if cfg.env == "moead" else [])
    rows = []
    for e in range(episodes):
        ep = run_episode(env, policy, rng)
        row = {"episode": e, "return": ep.ret}
        if cfg.env == "moead":
            row["final_igd"] = ep.info["final_igd"]
        rows.append(row)
    lines = [EVAL_SCHEMA, ",".join(columns)]
    for r in rows:
        lines.append(",".join([str(r["episode"])] + [_fmt(r[c]) for c in columns[1:]]))
    for name, fn in (("mean", np.mean), ("std", np.std)):
        lines.append(",".join([name] + [_fmt(fn([r[c] for r in rows])) for c in columns[1:]]))
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return rows


# -- compare -----------------------------------------------------------------------------------


def load_run(run_dir) -> tuple[RunConfig, dict[int, float]]:
    """Config snapshot and final eval mean per seed of a training run directory."""
    run_dir = Path(run_dir)
    snap = run_dir / SNAPSHOT
    if not snap.is_file():
        raise RunError(f"{run_dir}: no {SNAPSHOT} snapshot; not a run directory")
    cfg = cfgmod.load(snap)
    finals = {}
    for s in cfg.seeds:
        rows = read_train_csv(run_dir / f"seed_{s}" / "train.csv")
        if not rows:
            raise RunError(f"{run_dir}/seed_{s}: empty train.csv")
        finals[s] = rows[-1]["eval_mean"]
    return cfg, finals


def competition_ranks(values: list[float], lower_is_better: bool) -> list[int]:
    """Rank 1 is best; equal values share the smallest rank."""
    key = [v if lower_is_better else -v for v in values]
    return [1 + sum(k2 < k for k2 in key) for k in key]


def cmd_compare(run_dirs, out=None) -> list[dict]:
    if len(run_dirs) < 2:
        raise RunError("compare needs at least two run directories")
    loaded = [(Path(d), *load_run(d)) for d in run_dirs]
    spec = loaded[0][1].env_spec()
    for d, cfg, _ in loaded[1:]:
        if cfg.env_spec() != spec:
            raise RunError(f"environment mismatch: {loaded[0][0]} has {spec}, {d} has {cfg.env_spec()}")
    lower = loaded[0][1].lower_is_better
    table = []
    for d, cfg, finals in loaded:
        vals = np.array([finals[s] for s in cfg.seeds])
        table.append({
            "run": d.name,
            "learner": cfg.learner,
            "agent_order": cfg.agent_order.replace(",", " "),
            "metric": cfg.metric,
            "seeds": len(vals),
            "mean": float(vals.mean()),
            "std": float(vals.std()),
        })
    for row, rank in zip(table, competition_ranks([r["mean"] for r in table], lower)):
        row["rank"] = rank
    cols = ["run", "learner", "agent_order", "metric", "seeds", "mean", "std", "rank"]
    csv_lines = [COMPARE_SCHEMA, ",".join(cols)]
    for r in table:
        csv_lines.append(",".join(_fmt(r[c]) if c in ("mean", "std") else str(r[c]) for c in cols))
    if out is not None:
        Path(out).write_text("\n".join(csv_lines) + "\n")
    widths = [max(len(c), *(len(f"{r[c]:.6g}" if c in ("mean", "std") else str(r[c])) for r in table)) for c in cols]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for r in table:
        cells = [f"{r[c]:.6g}" if c in ("mean", "std") else str(r[c]) for c in cols]
        print("  ".join(v.ljust(w) for v, w in zip(cells, widths)))
    return table


# -- bench -------------------------------------------------------------------------------------


def _random_policy(env, rng):
    return lambda state: [int(rng.integers(n)) for n in env.action_sizes]


def bench_env(name: str, env, episodes: int, seed: int) -> dict:
    """Random-policy rollouts plus contract checks for one environment."""
    checks = []
    t0 = time.perf_counter()
    rets, steps = [], 0
    rng = np.random.default_rng(seed)
    for _ in range(episodes):
        ep = run_episode(env, _random_policy(env, rng), rng)
        rets.append(ep.ret)
        steps += len(ep)
    elapsed = time.perf_counter() - t0
    checks.append(("finite_returns", all(math.isfinite(r) for r in rets)))
    try:
        env.step([0] * env.n_agents)
        checks.append(("step_after_done_raises", False))
    except EnvDoneError:
        checks.append(("step_after_done_raises", True))
    rng2 = np.random.default_rng(seed)
    again = [run_episode(env, _random_policy(env, rng2), rng2).ret for _ in range(episodes)]
    checks.append(("deterministic", again == rets))
    s = env.reset(np.random.default_rng(seed))
    checks.append(("state_dim", s.shape == (env.state_dim,)))
    return {
        "env": name,
        "episodes": episodes,
        "steps": steps,
        "mean_return": float(np.mean(rets)),
        "ms_per_step": 1000.0 * elapsed / max(steps, 1),
        "failed": [c for c, ok in checks if not ok],
    }


def cmd_bench(envs: list[str], episodes: int, seed: int) -> list[dict]:
    from ..mmdp import ConstantEnv
    from ..moead.env import MoeadEnv
    from ..sigmoid import SigmoidEnv

    factories = {
        "constant": lambda: ConstantEnv(),
        "sigmoid": lambda: SigmoidEnv("sigmoid"),
        "seq": lambda: SigmoidEnv("seq"),
        "seq-mask": lambda: SigmoidEnv("seq-mask"),
        "seq-robust": lambda: SigmoidEnv("seq-robust", n_random=1),
        "moead": lambda: MoeadEnv(T_episode=5),
    }
    names = list(factories) if envs == ["all"] else envs
    unknown = [n for n in names if n not in factories]
    if unknown:
        raise ConfigError(f"unknown bench env(s) {unknown}; choose from {list(factories)} or all")
    results = [bench_env(n, factories[n](), episodes, seed) for n in names]
    print(f"{'env':<12}{'episodes':>9}{'steps':>8}{'mean_return':>14}{'ms/step':>10}  checks")
    for r in results:
        status = "ok" if not r["failed"] else "FAILED: " + ", ".join(r["failed"])
        print(f"{r['env']:<12}{r['episodes']:>9}{r['steps']:>8}{r['mean_return']:>14.6g}{r['ms_per_step']:>10.3f}  {status}")
    return results


# -- entry point -------------------------------------------------------------------------------


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ConfigError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqdac", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a learner over the configured seeds")
    t.add_argument("config", help="key=value config file")
    t.add_argument("--out", required=True, help="run directory to create")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--jobs", type=int, default=1, help="seeds trained in parallel")

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    e.add_argument("checkpoint", help="checkpoint directory")
    e.add_argument("--config", required=True, help="config file naming the environment")
    e.add_argument("--set", action="append", metavar="KEY=VALUE")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="CSV path (default: stdout)")

    c = sub.add_parser("compare", help="summarize final evaluations of several runs")
    c.add_argument("runs", nargs="+", help="run directories")
    c.add_argument("--out", help="also write the table as CSV")

    b = sub.add_parser("bench", help="environment micro-tests with a random policy")
    b.add_argument("--env", action="append", help="environment name (repeatable, default all)")
    b.add_argument("--episodes", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            cfg = cfgmod.load(args.config, _overrides(args.set))
            cmd_train(cfg, Path(args.out), args.jobs)
        elif args.command == "eval":
            cfg = cfgmod.load(args.config, _overrides(args.set))
            if args.episodes < 1:
                raise ConfigError("--episodes must be positive")
            cmd_eval(args.checkpoint, cfg, args.episodes, args.seed, args.out)
        elif args.command == "compare":
            cmd_compare(args.runs, args.out)
        elif args.command == "bench":
            results = cmd_bench(args.env or ["all"], args.episodes, args.seed)
            if any(r["failed"] for r in results):
                return EXIT_RUNTIME
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every other failure maps to the runtime exit code
        print(f"error: {e}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
