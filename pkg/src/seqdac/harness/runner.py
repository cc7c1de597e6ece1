"""Training and evaluation loops shared by the CLI and the acceptance suite."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..learners import Learner, epsilon_at
from ..mmdp import ReplayBuffer, run_episode

log = logging.getLogger(__name__)


@dataclass
class EvalRow:
    step: int
    mean: float
    std: float
    episodes: int
    values: list[float]


def episode_metric(metric: str, episode) -> float:
    if metric == "return":
        return episode.ret
    return float(episode.info[metric])


def evaluate(
    policy: Callable,
    env,
    episodes: int,
    seed: int,
    metric: str = "return",
) -> EvalRow:
    """Run ``episodes`` greedy episodes on instances drawn from ``seed``.

    No transitions are stored and nothing is learned.
    """
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(episodes):
        ep = run_episode(env, policy, rng)
        values.append(episode_metric(metric, ep))
    arr = np.asarray(values)
    return EvalRow(0, float(arr.mean()), float(arr.std()), episodes, values)


def evaluate_learner(learner: Learner, env, episodes: int, seed: int, metric: str = "return") -> EvalRow:
    return evaluate(learner.policy(epsilon=0.0), env, episodes, seed, metric)


def train(
    learner: Learner,
    env,
    total_steps: int,
    *,
    seed: int,
    eval_env=None,
    eval_interval: int = 0,
    eval_episodes: int = 10,
    eval_seed: int = 10_000,
    metric: str = "return",
    on_eval: Callable[[EvalRow], None] | None = None,
) -> list[EvalRow]:
    """Epsilon-greedy training for ``total_steps`` env steps, one update per step after warmup.

    Evaluates at step 0, every ``eval_interval`` steps, and at the end. Every
    evaluation uses the same instance seed so rows are comparable.
    """
    cfg = learner.config
    rng = np.random.default_rng(seed)
    buffer = ReplayBuffer(cfg.buffer_capacity, learner.state_dim, learner.n_agents, rng)
    # evaluation may fire mid-episode, so it never touches the training env
    eval_env = eval_env if eval_env is not None else copy.deepcopy(env)
    rows: list[EvalRow] = []

    def do_eval(step: int) -> None:
        row = evaluate_learner(learner, eval_env, eval_episodes, eval_seed, metric)
        row.step = step
        rows.append(row)
        log.info("step %d: eval %s mean=%.6g std=%.6g", step, metric, row.mean, row.std)
        if on_eval is not None:
            on_eval(row)

    do_eval(0)
    step = 0
    while step < total_steps:
        state = env.reset(rng)
        done = False
        while not done and step < total_steps:
            eps = epsilon_at(step, total_steps, cfg)
            action = learner.select_actions(state, eps, rng)
            next_state, r, done = env.step(action)
            buffer.push_arrays(state, action, r, next_state, done)
            state = next_state
            step += 1
            if len(buffer) >= cfg.warmup and buffer.ready(cfg.batch_size):
                learner.update(buffer.sample(cfg.batch_size))
            if eval_interval and step % eval_interval == 0 and step < total_steps:
                do_eval(step)
    if total_steps > 0:
        do_eval(total_steps)
    return rows
