"""Value-based multi-agent learners sharing one hyperparameter config."""

from pathlib import Path
import json

from .base import LearnerConfig, Learner, epsilon_at, resolve_order, MANIFEST
from .sadn import SadnLearner
from .baselines import AceLearner, SaqlLearner, VdnLearner

LEARNERS = {cls.kind: cls for cls in (SadnLearner, VdnLearner, SaqlLearner, AceLearner)}


def make_learner(kind: str, state_dim: int, action_sizes, config=None, rng=None, order=None) -> Learner:
    try:
        cls = LEARNERS[kind]
    except KeyError:
        raise ValueError(f"unknown learner {kind!r}; choose from {sorted(LEARNERS)}") from None
    return cls(state_dim, action_sizes, config, rng, order)


def load_learner(path) -> Learner:
    """Rebuild a learner from a checkpoint directory written by ``Learner.save``."""
    path = Path(path)
    manifest = json.loads((path / MANIFEST).read_text())
    learner = make_learner(
        manifest["kind"],
        manifest["state_dim"],
        manifest["action_sizes"],
        LearnerConfig.from_dict(manifest["config"]),
        order=manifest["order"],
    )
    learner.load_networks(path)
    return learner


__all__ = [
    "AceLearner",
    "LEARNERS",
    "Learner",
    "LearnerConfig",
    "SadnLearner",
    "SaqlLearner",
    "VdnLearner",
    "epsilon_at",
    "load_learner",
    "make_learner",
    "resolve_order",
]
