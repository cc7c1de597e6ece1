"""Sequential multi-agent MDP contract, episode driver, and replay buffer."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np


class EnvDoneError(RuntimeError):
    """``step`` was called on a finished episode without ``reset``."""


class WarmupError(RuntimeError):
    """The replay buffer holds fewer transitions than one batch."""


class SeqMmdpEnv(Protocol):
    n_agents: int
    action_sizes: tuple[int, ...]
    state_dim: int

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray: ...

    def step(self, joint_action: Sequence[int]) -> tuple[np.ndarray, float, bool]: ...


@dataclass
class Transition:
    state: np.ndarray
    joint_action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class Batch:
    states: np.ndarray  # (B, state_dim)
    actions: np.ndarray  # (B, n_agents) int
    rewards: np.ndarray  # (B,)
    next_states: np.ndarray
    dones: np.ndarray  # (B,) float, 1.0 at terminal

    def __len__(self) -> int:
        return len(self.rewards)

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "Batch":
        return cls(
            np.array([t.state for t in transitions], dtype=np.float64),
            np.array([t.joint_action for t in transitions], dtype=np.int64),
            np.array([t.reward for t in transitions], dtype=np.float64),
            np.array([t.next_state for t in transitions], dtype=np.float64),
            np.array([t.done for t in transitions], dtype=np.float64),
        )


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling without replacement."""

    def __init__(self, capacity: int, state_dim: int, n_agents: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self._states = np.zeros((capacity, state_dim))
        self._next_states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity)
        self._next = 0
        self._size = 0
        self.total_inserted = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        self.push_arrays(t.state, t.joint_action, t.reward, t.next_state, t.done)

    def push_arrays(self, state, joint_action, reward, next_state, done) -> None:
        i = self._next
        self._states[i] = state
        self._next_states[i] = next_state
        self._actions[i] = joint_action
        self._rewards[i] = reward
        self._dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self.total_inserted += 1

    def ready(self, batch_size: int) -> bool:
        return self._size >= batch_size

    def sample(self, batch_size: int = 32) -> Batch:
        if self._size < batch_size:
            raise WarmupError(f"buffer holds {self._size} < {batch_size} transitions")
        idx = self.rng.choice(self._size, size=batch_size, replace=False)
        return Batch(
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._dones[idx],
        )

    def contents(self) -> Batch:
        """All stored transitions, oldest first."""
        if self._size < self.capacity:
            idx = np.arange(self._size)
        else:
            idx = (np.arange(self.capacity) + self._next) % self.capacity
        return Batch(
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._dones[idx],
        )


Policy = Callable[[np.ndarray], Sequence[int]]


@dataclass
class Episode:
    ret: float
    transitions: list[Transition] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.transitions)


def check_joint_action(env: SeqMmdpEnv, joint_action: Sequence[int]) -> np.ndarray:
    a = np.asarray(joint_action, dtype=np.int64)
    if a.shape != (env.n_agents,):
        raise ValueError(f"joint action must have {env.n_agents} entries, got {a.shape}")
    sizes = np.asarray(env.action_sizes)
    if np.any(a < 0) or np.any(a >= sizes):
        raise ValueError(f"action {a.tolist()} out of range for sizes {sizes.tolist()}")
    return a


def run_episode(
    env: SeqMmdpEnv,
    policy: Policy,
    rng: np.random.Generator | None = None,
    buffer: ReplayBuffer | None = None,
    on_step: Callable[[Transition], None] | None = None,
) -> Episode:
    """Reset ``env`` (drawing a fresh instance from ``rng``) and roll out ``policy``.

    The return is the undiscounted reward sum. Transitions go to ``buffer``
    when one is given.
    """
    state = env.reset(rng)
    episode = Episode(0.0)
    done = False
    while not done:
        action = check_joint_action(env, policy(state))
        next_state, reward, done = env.step(action)
        t = Transition(state, action, float(reward), next_state, bool(done))
        episode.transitions.append(t)
        episode.ret += float(reward)
        if buffer is not None:
            buffer.push(t)
        if on_step is not None:
            on_step(t)
        state = next_state
    info = getattr(env, "episode_info", None)
    if callable(info):
        episode.info = info()
    return episode


def write_trajectory_csv(path, episodes: Sequence[Episode], n_agents: int) -> None:
    """Rows ``episode,step,reward,a_1..a_n``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "step", "reward"] + [f"a_{i + 1}" for i in range(n_agents)])
        for e, ep in enumerate(episodes):
            for s, t in enumerate(ep.transitions):
                w.writerow([e, s, repr(t.reward)] + [int(a) for a in t.joint_action])


class ConstantEnv:
    """Fixed-length episodes with a constant reward; a smoke-test environment."""

    def __init__(self, reward: float = 0.5, horizon: int = 10, action_sizes=(2, 2), state_dim: int = 1, seed: int = 0):
        self.reward = float(reward)
        self.horizon = int(horizon)
        self.action_sizes = tuple(int(c) for c in action_sizes)
        self.n_agents = len(self.action_sizes)
        self.state_dim = int(state_dim)
        self.rng = np.random.default_rng(seed)
        self._t = 0
        self._done = True

    def _state(self) -> np.ndarray:
        s = np.zeros(self.state_dim)
        s[0] = self._t / self.horizon
        return s

    def reset(self, rng=None) -> np.ndarray:
        self._t = 0
        self._done = False
        return self._state()

    def step(self, joint_action):
        if self._done:
            raise EnvDoneError("step after done; call reset()")
        check_joint_action(self, joint_action)
        self._t += 1
        self._done = self._t >= self.horizon
        return self._state(), self.reward, self._done
