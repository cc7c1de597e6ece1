"""MOEA/D as a four-agent sequential MMDP: one step is one generation.

Agents, in default order: neighbourhood size, DE operator, scaling factor F,
and whether to adapt weights. The 22-entry state layout is::

    0 1/m           1 1/D           2 t/T           3 N_stag/T
    4 HV            5 NDRatio       6 Dist
    7-9   one-step changes of HV, NDRatio, Dist
    10-12 means over the last 5 steps     13-15 stds over the last 5 steps
    16-18 means over all steps so far     19-21 stds over all steps so far

HV uses objectives divided by the reference front's per-axis maxima, the
reference point ``(2, ..., 2)``, and is divided by the box volume ``2^m``.
Dist is the mean nearest-neighbour distance on the same normalized
objectives. Standard deviations divide by the count. The reward is the
triangle reward on the population IGD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mmdp import EnvDoneError, check_joint_action
from .algorithm import (
    NEIGHBORHOOD_SIZES,
    OPERATORS,
    SCALING_FACTORS,
    WEIGHT_ADAPTATION,
    ActionTuple,
    MoeadRun,
    init_run,
    moead_generation,
)
from .indicators import hypervolume, igd, mean_nearest_distance, nondominated_mask
from .problems import make_problem
from .reference import reference_front

STATE_DIM = 22
ACTION_SIZES = (len(NEIGHBORHOOD_SIZES), len(OPERATORS), len(SCALING_FACTORS), len(WEIGHT_ADAPTATION))
DEFAULT_JOINT_ACTION = (1, 0, 1, 0)  # (20, OP1, 0.5, no adaptation)


class DegenerateInstanceError(RuntimeError):
    """The initial IGD is zero, so progress is undefined."""


def to_action(joint_action) -> ActionTuple:
    a = [int(v) for v in joint_action]
    return ActionTuple(
        neighborhood_size=NEIGHBORHOOD_SIZES[a[0]],
        operator=OPERATORS[a[1]],
        F=SCALING_FACTORS[a[2]],
        adapt_weights=WEIGHT_ADAPTATION[a[3]],
    )


@dataclass
class TriangleReward:
    """``r = (p_new^2 - p^2) / 2`` on improvement of the best metric, else 0."""

    initial: float
    best: float = field(init=False)
    progress: float = 0.0

    def __post_init__(self):
        if not self.initial > 0.0:
            raise DegenerateInstanceError(f"initial metric must be positive, got {self.initial}")
        self.best = self.initial

    def __call__(self, metric: float) -> float:
        if metric < self.best:
            p_new = (self.initial - metric) / self.initial
            r = 0.5 * (p_new * p_new - self.progress * self.progress)
            self.progress = p_new
            self.best = metric
            return r
        return 0.0


def state_features(m: int, D: int, t: int, T: int, n_stag: int, history: np.ndarray) -> np.ndarray:
    """22-entry state from ``history``, a ``(t + 1, 3)`` array of (HV, NDRatio, Dist) rows."""
    h = np.asarray(history, dtype=np.float64)
    cur = h[-1]
    delta = h[-1] - h[-2] if len(h) > 1 else np.zeros(3)
    last5 = h[-5:]
    return np.concatenate(
        [
            [1.0 / m, 1.0 / D, t / T, n_stag / T],
            cur,
            delta,
            last5.mean(axis=0),
            last5.std(axis=0),
            h.mean(axis=0),
            h.std(axis=0),
        ]
    )


class MoeadEnv:
    """Dynamic configuration of MOEA/D on one DTLZ/WFG problem."""

    n_agents = 4
    action_sizes = ACTION_SIZES
    state_dim = STATE_DIM

    def __init__(
        self,
        problem: str = "DTLZ2",
        m: int = 3,
        D: int = 6,
        N: int = 100,
        T_episode: int = 50,
        seed: int | None = 0,
        K: float = 0.5,
    ):
        if N <= m + 5:
            raise ValueError(f"population N={N} too small for m={m}")
        if T_episode < 1:
            raise ValueError("T_episode must be positive")
        self.problem = make_problem(problem, m, D)
        self.m, self.D, self.N = self.problem.m, self.problem.D, int(N)
        self.T = int(T_episode)
        self.K = float(K)
        self.reference = reference_front(self.problem.name, self.m)
        self.scale = self.reference.max(axis=0)
        self.rng = np.random.default_rng(seed)
        self.run: MoeadRun | None = None
        self._done = True

    # -- measurements

    def igd(self) -> float:
        return igd(self.run.F, self.reference)

    def _measure(self) -> np.ndarray:
        F = self.run.F / self.scale
        hv = hypervolume(F, np.full(self.m, 2.0)) / 2.0**self.m
        nd = float(np.mean(nondominated_mask(F)))
        return np.array([hv, nd, mean_nearest_distance(F)])

    def _state(self) -> np.ndarray:
        return state_features(self.m, self.D, self.t, self.T, self.n_stag, np.asarray(self.history))

    # -- MMDP contract

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        src = rng if rng is not None else self.rng
        # the run owns its stream so trajectories depend only on the instance seed and actions
        self.run_rng = np.random.default_rng(int(src.integers(2**63)))
        self.run = init_run(self.problem, self.N, self.run_rng)
        self.t = 0
        self.n_stag = 0
        self.reward_fn = TriangleReward(self.igd())
        self.history = [self._measure()]
        self.metrics = [self.reward_fn.initial]
        self._done = False
        return self._state()

    def step(self, joint_action):
        if self._done:
            raise EnvDoneError("step after done; call reset()")
        a = check_joint_action(self, joint_action)
        moead_generation(self.run, to_action(a), self.run_rng, self.K)
        metric = self.igd()
        improved = metric < self.reward_fn.best
        r = self.reward_fn(metric)
        self.n_stag = 0 if improved else self.n_stag + 1
        self.metrics.append(metric)
        self.t += 1
        self.history.append(self._measure())
        self._done = self.t >= self.T
        return self._state(), r, self._done

    def episode_info(self) -> dict:
        return {
            "final_igd": self.metrics[-1],
            "best_igd": self.reward_fn.best,
            "final_hv": float(self.history[-1][0]),
            "progress": self.reward_fn.progress,
        }
