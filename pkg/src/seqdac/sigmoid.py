"""Sigmoid-approximation benchmarks with and without action inter-dependencies.

Four variants share one environment class:

``sigmoid``
    Independent targets; reward ``Π_h (1 - |sig_h - a_h|)``.
``seq``
    Agent ``h``'s target slope is scaled by 10 when ``a_{h-1} >= 0.5`` and by
    0.1 otherwise. Distance is symmetric about 0.5:
    ``min(|sig - a|, |1 - sig - a|)``.
``seq-mask``
    ``seq`` with every slope fixed to 1 and only the time step observed.
``seq-robust``
    ``seq`` where ``n_random`` dimensions starting at ``H // 2`` are overwritten
    with uniform random grid values each step.

An episode runs ``t = 0, 1, ..., T`` (``T + 1`` decisions). A fresh instance
is sampled at every reset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .mmdp import EnvDoneError, check_joint_action

VARIANTS = ("sigmoid", "seq", "seq-mask", "seq-robust")


def sig(t, slope, inflection):
    """``1 / (1 + exp(-slope * (t - inflection)))``, overflow-safe."""
    return expit(np.multiply(slope, np.subtract(t, inflection)))


def alpha(h: int, prev_action_value: float | None) -> float:
    """Slope scaling for dimension ``h`` given the previous dimension's action value."""
    if h == 0:
        return 1.0
    return 10.0 if prev_action_value >= 0.5 else 0.1


@dataclass
class SigmoidInstance:
    slopes: np.ndarray
    inflections: np.ndarray
    T: int
    choices: tuple[int, ...]

    @property
    def H(self) -> int:
        return len(self.slopes)

    @classmethod
    def sample(cls, rng: np.random.Generator, H: int, T: int, choices, unit_slopes: bool = False):
        slopes = np.ones(H) if unit_slopes else rng.uniform(-100.0, 100.0, H)
        # mean T/2, standard deviation T/4
        inflections = rng.normal(T / 2.0, T / 4.0, H)
        return cls(slopes, inflections, T, tuple(choices))


def robust_indices(H: int, n_random: int) -> tuple[int, ...]:
    start = H // 2
    idx = tuple(range(start, start + n_random))
    if n_random < 0 or idx and idx[-1] >= H:
        raise ValueError(f"cannot randomize {n_random} dimensions starting at {start} with H={H}")
    return idx


def reward(variant: str, instance: SigmoidInstance, t: float, action_values) -> float:
    """Team reward for action *values* (grid points in [0, 1)) at step ``t``."""
    a = np.asarray(action_values, dtype=np.float64)
    if variant == "sigmoid":
        target = sig(t, instance.slopes, instance.inflections)
        return float(np.prod(1.0 - np.abs(target - a)))
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    scale = np.ones(instance.H)
    scale[1:] = np.where(a[:-1] >= 0.5, 10.0, 0.1)
    slopes = np.ones(instance.H) if variant == "seq-mask" else instance.slopes
    target = sig(t, scale * slopes, instance.inflections)
    dist = np.minimum(np.abs(target - a), np.abs(1.0 - target - a))
    return float(np.prod(1.0 - dist))


def state(variant: str, instance: SigmoidInstance, t: int) -> np.ndarray:
    """Observation, scaled: slopes / 100, inflections / T, t / T."""
    T = instance.T
    if variant == "seq-mask":
        return np.array([t / T])
    return np.concatenate([instance.slopes / 100.0, instance.inflections / T, [t / T]])


class SigmoidEnv:
    """Sigmoid-family benchmark behind the sequential MMDP contract."""

    def __init__(
        self,
        variant: str = "seq",
        H: int = 5,
        C: int | tuple[int, ...] = 10,
        T: int = 10,
        n_random: int = 0,
        seed: int | None = 0,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        if H < 1 or T < 1:
            raise ValueError("H and T must be positive")
        self.variant = variant
        self.H = int(H)
        self.T = int(T)
        self.choices = (int(C),) * self.H if np.isscalar(C) else tuple(int(c) for c in C)
        if len(self.choices) != self.H or min(self.choices) < 1:
            raise ValueError(f"need {self.H} positive choice counts, got {self.choices}")
        self.random_indices = robust_indices(self.H, n_random) if variant == "seq-robust" else ()
        self.n_agents = self.H
        self.action_sizes = self.choices
        self.state_dim = 1 if variant == "seq-mask" else 2 * self.H + 1
        self.rng = np.random.default_rng(seed)
        self.instance: SigmoidInstance | None = None
        self.t = 0
        self._done = True
        self.last_action_values: np.ndarray | None = None

    def action_values(self, joint_action) -> np.ndarray:
        return np.asarray(joint_action, dtype=np.float64) / np.asarray(self.choices)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = rng if rng is not None else self.rng
        self.instance = SigmoidInstance.sample(
            rng, self.H, self.T, self.choices, unit_slopes=self.variant == "seq-mask"
        )
        # overwrite noise follows the instance stream so episodes replay exactly
        self.noise_rng = np.random.default_rng(int(rng.integers(2**63))) if self.random_indices else None
        self.t = 0
        self._done = False
        return state(self.variant, self.instance, self.t)

    def step(self, joint_action):
        if self._done:
            raise EnvDoneError("step after done; call reset()")
        a = check_joint_action(self, joint_action).copy()
        for h in self.random_indices:
            a[h] = self.noise_rng.integers(self.choices[h])
        values = self.action_values(a)
        self.last_action_values = values
        r = reward(self.variant, self.instance, self.t, values)
        self.t += 1
        self._done = self.t > self.T
        obs_t = min(self.t, self.T)
        return state(self.variant, self.instance, obs_t), r, self._done
