"""Flat ``key = value`` run configuration with ``include`` directives.

Example::

    include defaults.cfg
    learner = sadn
    env = sigmoid
    variant = seq-mask
    seeds = 0, 1, 2

Lines starting with ``#`` are comments. ``include PATH`` splices another file
(relative to the including file) at that point; later assignments override
earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from ..learners import LEARNERS, LearnerConfig
from ..learners.base import resolve_order
from ..moead.problems import PROBLEMS
from ..sigmoid import VARIANTS

ENVS = ("sigmoid", "moead", "constant")


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def parse_lines(text: str, base: Path | None = None, _seen: frozenset = frozenset()) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include ") or line == "include":
            target = line[len("include") :].strip()
            if not target:
                raise ConfigError(f"line {n}: include needs a path")
            path = (base / target) if base is not None else Path(target)
            out.update(read_raw(path, _seen))
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def read_raw(path, _seen: frozenset = frozenset()) -> dict[str, str]:
    path = Path(path)
    resolved = path.resolve()
    if resolved in _seen:
        raise ConfigError(f"include cycle through {path}")
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_lines(text, path.parent, _seen | {resolved})


def _int_list(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.replace(",", " ").split())


@dataclass(frozen=True)
class RunConfig:
    learner: str = "sadn"
    env: str = "sigmoid"
    # sigmoid
    variant: str = "seq-mask"
    H: int = 5
    C: int = 10
    T: int = 10
    n_random: int = 0
    # moead
    problem: str = "DTLZ2"
    m: int = 3
    D: int = 6
    N: int = 100
    T_episode: int = 50
    # constant
    reward: float = 0.5
    horizon: int = 10
    action_sizes: tuple[int, ...] = (2, 2)
    # schedule
    agent_order: str = "identity"
    total_steps: int = 10_000
    eval_interval: int = 1_000
    eval_episodes: int = 10
    eval_seed: int = 10_000
    seeds: tuple[int, ...] = (0,)
    learner_config: LearnerConfig = field(default_factory=LearnerConfig)

    @property
    def metric(self) -> str:
        return "final_igd" if self.env == "moead" else "return"

    @property
    def lower_is_better(self) -> bool:
        return self.metric == "final_igd"

    def env_spec(self) -> dict:
        """Keys that identify the environment (runs are comparable when these match)."""
        if self.env == "sigmoid":
            keys = ("variant", "H", "C", "T", "n_random")
        elif self.env == "moead":
            keys = ("problem", "m", "D", "N", "T_episode")
        else:
            keys = ("reward", "horizon", "action_sizes")
        return {"env": self.env, **{k: getattr(self, k) for k in keys}}

    def make_env(self):
        if self.env == "sigmoid":
            from ..sigmoid import SigmoidEnv

            return SigmoidEnv(self.variant, self.H, self.C, self.T, self.n_random)
        if self.env == "moead":
            from ..moead.env import MoeadEnv

            return MoeadEnv(self.problem, self.m, self.D, self.N, self.T_episode)
        from ..mmdp import ConstantEnv

        return ConstantEnv(self.reward, self.horizon, self.action_sizes)

    def order(self, n_agents: int):
        if self.agent_order in ("identity", "reverse"):
            return resolve_order(self.agent_order, n_agents)
        return resolve_order(_int_list(self.agent_order), n_agents)

    def to_text(self) -> str:
        """Canonical snapshot: every key, sorted, one per line."""
        flat = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "learner_config"}
        flat.update({f.name: getattr(self.learner_config, f.name) for f in fields(LearnerConfig)})
        lines = []
        for k in sorted(flat):
            v = flat[k]
            if isinstance(v, tuple):
                v = ", ".join(str(i) for i in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


_LEARNER_KEYS = {f.name for f in fields(LearnerConfig)}
_RUN_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "learner_config"}


def _convert(key: str, value: str, default):
    try:
        if isinstance(default, bool):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(value)
            return value.lower() in ("true", "1")
        if isinstance(default, tuple):
            return _int_list(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError as e:
        raise ConfigError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from e


def from_raw(raw: dict[str, str]) -> RunConfig:
    run_kw: dict = {}
    learner_kw: dict = {}
    base, lbase = RunConfig(), LearnerConfig()
    for key, value in raw.items():
        if key in _RUN_FIELDS:
            run_kw[key] = _convert(key, value, getattr(base, key))
        elif key in _LEARNER_KEYS:
            learner_kw[key] = _convert(key, value, getattr(lbase, key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = RunConfig(**run_kw, learner_config=LearnerConfig(**learner_kw))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.learner not in LEARNERS:
        raise ConfigError(f"learner must be one of {sorted(LEARNERS)}, got {cfg.learner!r}")
    if cfg.env not in ENVS:
        raise ConfigError(f"env must be one of {ENVS}, got {cfg.env!r}")
    if cfg.env == "sigmoid" and cfg.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {cfg.variant!r}")
    if cfg.env == "moead" and cfg.problem.upper() not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {cfg.problem!r}")
    if cfg.total_steps < 0 or cfg.eval_interval < 0 or cfg.eval_episodes < 1:
        raise ConfigError("total_steps and eval_interval must be >= 0, eval_episodes >= 1")
    if not cfg.seeds:
        raise ConfigError("seeds must list at least one seed")
    lc = cfg.learner_config
    if lc.batch_size < 1 or lc.hidden_dim < 1 or lc.target_interval < 1 or lc.buffer_capacity < lc.batch_size:
        raise ConfigError("batch_size, hidden_dim, target_interval must be positive; buffer >= batch")
    try:
        env = cfg.make_env()
        cfg.order(env.n_agents)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load(path, overrides: dict[str, str] | None = None) -> RunConfig:
    raw = read_raw(path)
    raw.update(overrides or {})
    return from_raw(raw)


def loads(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    raw = parse_lines(text)
    raw.update(overrides or {})
    return from_raw(raw)
