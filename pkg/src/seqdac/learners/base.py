"""Shared machinery for the value-based learners.

Every learner keeps its agents in a *learner order*, a permutation of the
environment's action dimensions. Agent ``k`` of the learner controls env
dimension ``order[k]`` and, for sequential learners, observes the state
followed by one-hot encodings of the actions already chosen by agents
``0..k-1``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import ClassVar, Sequence

import numpy as np

from ..mmdp import Batch
from ..nn import Mlp, deserialize, serialize

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters shared by every learner, with the standard defaults."""

    hidden_dim: int = 64
    lr: float = 1e-4
    batch_size: int = 32
    gamma: float = 0.99
    target_interval: int = 200
    grad_clip: float = 10.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.1
    buffer_capacity: int = 50_000
    warmup: int = 1_000

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown learner options: {sorted(unknown)}")
        return cls(**d)


def epsilon_at(step: int, total_steps: int, config: LearnerConfig = LearnerConfig()) -> float:
    """Linear anneal from ``eps_start`` to ``eps_end`` over the first ``eps_fraction`` of training."""
    horizon = config.eps_fraction * total_steps
    if horizon <= 0 or step >= horizon:
        return config.eps_end
    frac = step / horizon
    return config.eps_start + frac * (config.eps_end - config.eps_start)


def resolve_order(order, n_agents: int) -> tuple[int, ...]:
    if order is None or order == "identity":
        return tuple(range(n_agents))
    if order == "reverse":
        return tuple(reversed(range(n_agents)))
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(n_agents)):
        raise ValueError(f"agent order {order} is not a permutation of 0..{n_agents - 1}")
    return order


class Learner:
    kind: ClassVar[str] = ""
    sequential: ClassVar[bool] = True

    def __init__(
        self,
        state_dim: int,
        action_sizes: Sequence[int],
        config: LearnerConfig | None = None,
        rng: np.random.Generator | None = None,
        order=None,
    ):
        self.config = config or LearnerConfig()
        self.state_dim = int(state_dim)
        self.env_action_sizes = tuple(int(c) for c in action_sizes)
        self.n_agents = len(self.env_action_sizes)
        self.order = resolve_order(order, self.n_agents)
        self.sizes = tuple(self.env_action_sizes[i] for i in self.order)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.updates = 0
        # position of each env dimension in learner order
        self._inverse = np.argsort(self.order)

    # -- wiring ----------------------------------------------------------------

    def input_dim(self, k: int) -> int:
        if self.sequential:
            return self.state_dim + int(self.offsets[k])
        return self.state_dim

    @property
    def _prefix_width(self) -> int:
        return self.state_dim + int(self.offsets[self.n_agents - 1])

    def to_learner_order(self, actions: np.ndarray) -> np.ndarray:
        return np.asarray(actions)[..., list(self.order)]

    def to_env_order(self, actions: np.ndarray) -> np.ndarray:
        return np.asarray(actions)[..., self._inverse]

    def prefix_inputs(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``[state, onehot(a_0), ..., onehot(a_{n-2})]`` rows for learner-ordered actions.

        Agent ``k``'s input is the first ``input_dim(k)`` columns.
        """
        states = np.atleast_2d(states)
        b = states.shape[0]
        x = np.zeros((b, self._prefix_width))
        x[:, : self.state_dim] = states
        rows = np.arange(b)
        for k in range(self.n_agents - 1):
            x[rows, self.state_dim + self.offsets[k] + actions[:, k]] = 1.0
        return x

    # -- action selection ------------------------------------------------------

    def scores(self, k: int, x: np.ndarray) -> np.ndarray:
        """Values agent ``k`` maximizes, for inputs of width ``input_dim(k)``."""
        raise NotImplementedError

    def select_actions(
        self, state: np.ndarray, epsilon: float = 0.0, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Epsilon-greedy joint action in env order; agents act in learner order."""
        rng = rng if rng is not None else self.rng
        x = np.zeros(self._prefix_width)
        x[: self.state_dim] = state
        chosen = np.empty(self.n_agents, dtype=np.int64)
        for k in range(self.n_agents):
            if epsilon > 0.0 and rng.random() < epsilon:
                a = int(rng.integers(self.sizes[k]))
            else:
                a = int(np.argmax(self.scores(k, x[: self.input_dim(k)])))
            chosen[k] = a
            if self.sequential and k < self.n_agents - 1:
                x[self.state_dim + self.offsets[k] + a] = 1.0
        return self.to_env_order(chosen)

    def greedy_batch(self, states: np.ndarray) -> np.ndarray:
        """Greedy learner-ordered actions for a batch of states, using current nets."""
        b = states.shape[0]
        actions = np.zeros((b, self.n_agents), dtype=np.int64)
        x = np.zeros((b, self._prefix_width))
        x[:, : self.state_dim] = states
        rows = np.arange(b)
        for k in range(self.n_agents):
            actions[:, k] = np.argmax(self.scores(k, x[:, : self.input_dim(k)]), axis=1)
            if self.sequential and k < self.n_agents - 1:
                x[rows, self.state_dim + self.offsets[k] + actions[:, k]] = 1.0
        return actions

    def policy(self, epsilon: float = 0.0, rng: np.random.Generator | None = None):
        return lambda state: self.select_actions(state, epsilon, rng)

    # -- learning --------------------------------------------------------------

    def update(self, batch: Batch):
        raise NotImplementedError

    def _after_update(self) -> None:
        self.updates += 1
        if self.updates % self.config.target_interval == 0:
            self.refresh_targets()

    def refresh_targets(self) -> None:
        raise NotImplementedError

    @staticmethod
    def _finite(*values) -> bool:
        return all(np.all(np.isfinite(v)) for v in values)

    # -- checkpoints -----------------------------------------------------------

    def networks(self) -> dict[str, Mlp]:
        """Every network (online and target) by a stable name."""
        raise NotImplementedError

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        entries = []
        for name, net in self.networks().items():
            fname = f"{name}.bin"
            (path / fname).write_bytes(serialize(net))
            entries.append(
                {"name": name, "file": fname, "input_dim": net.input_dim, "output_dim": net.output_dim}
            )
        manifest = {
            "kind": self.kind,
            "state_dim": self.state_dim,
            "action_sizes": list(self.env_action_sizes),
            "order": list(self.order),
            "updates": self.updates,
            "config": asdict(self.config),
            "networks": entries,
        }
        (path / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
        return path

    def load_networks(self, path) -> None:
        path = Path(path)
        manifest = json.loads((path / MANIFEST).read_text())
        nets = self.networks()
        for entry in manifest["networks"]:
            net = nets.get(entry["name"])
            if net is None:
                raise ValueError(f"checkpoint has unexpected network {entry['name']!r}")
            loaded = deserialize((path / entry["file"]).read_bytes())
            if (loaded.input_dim, loaded.output_dim, loaded.hidden_dim) != (
                net.input_dim,
                net.output_dim,
                net.hidden_dim,
            ):
                raise ValueError(
                    f"network {entry['name']}: checkpoint shape "
                    f"{loaded.input_dim}x{loaded.hidden_dim}x{loaded.output_dim} vs "
                    f"expected {net.input_dim}x{net.hidden_dim}x{net.output_dim}"
                )
            net.load_from(loaded)
        self.updates = int(manifest.get("updates", 0))
