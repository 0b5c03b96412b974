"""Run configuration: a versioned JSON document, validated before any run.

Example::

    {"version": 1, "experiment": "tf", "n": 32, "sigma": 3,
     "policy": "uniform_random", "injections": {"random": {"total": 12, "span": 5}},
     "seed": 7}

Unknown keys are rejected.  ``seeds`` takes ``[first, last]`` (inclusive) or
an explicit list and overrides ``seed`` for sweeps.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .adversary import POLICY_KINDS

EXPERIMENTS = ("tf", "le_implicit", "le_explicit", "vtf", "dtc", "lowerbound", "conformance")
TERM_IMPLS = ("accumulation_based", "term_tokens")
VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "tf"
    n: int = 32
    sigma: int | None = None
    sigma_vec: list | None = None
    epsilon: float = 1.0
    c: float = 3.0
    c_le: float = 12.0
    term_impl: str = "accumulation_based"
    policy: str = "uniform_random"
    injections: object = None
    script: str | None = None
    fragile_size: int | None = None
    toggles: bool = True
    seed: int = 0
    seeds: list | None = None
    max_sim_time: float | None = None
    out: str | None = None
    log_events: bool = False
    checkers: bool = True
    trace: bool = False
    restart_after_team: bool = False
    threshold: int | None = None
    f: int | None = None
    trials: int = 10000
    mode: str = "bernoulli"
    version: int = VERSION

    # -- construction ---------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "RunConfig":
        d = self.to_dict()
        d.update(kw)
        return RunConfig.from_dict(d)

    # -- validation -----------------------------------------------------
    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.version == VERSION, f"unsupported config version {self.version}")
        need(self.experiment in EXPERIMENTS, f"unknown experiment {self.experiment!r}")
        need(_is_int(self.n) and self.n >= 2, "n must be an integer >= 2")
        need(_is_num(self.epsilon) and 0 < self.epsilon <= 1, "epsilon must lie in (0, 1]")
        need(_is_num(self.c) and self.c > 0, "c must be positive")
        need(_is_num(self.c_le) and self.c_le > 0, "c_le must be positive")
        need(self.policy in POLICY_KINDS or self.policy == "anti_gather",
             f"unknown policy {self.policy!r}")
        need(self.policy != "scripted" or self.script, "scripted policy needs a script path")
        need(_is_int(self.seed), "seed must be an integer")
        need(self.term_impl in TERM_IMPLS, f"unknown term_impl {self.term_impl!r}")
        need(self.max_sim_time is None or (_is_num(self.max_sim_time) and self.max_sim_time > 0),
             "max_sim_time must be positive")
        need(self.fragile_size is None or (_is_int(self.fragile_size) and self.fragile_size >= 0),
             "fragile_size must be a non-negative integer")
        if self.seeds is not None:
            need(isinstance(self.seeds, list) and self.seeds and all(_is_int(s) for s in self.seeds),
                 "seeds must be [first, last] or a list of integers")
        exp = self.experiment
        if exp in ("tf", "conformance"):
            need(_is_int(self.sigma), "sigma is required")
            need(2 <= self.sigma <= self.n, "sigma must satisfy 2 <= sigma <= n")
        if exp == "dtc":
            thr = self.threshold if self.threshold is not None else self.sigma
            need(_is_int(thr) and thr >= 2, "threshold must be an integer >= 2")
        if exp == "vtf":
            vec = self.sigma_vec
            need(isinstance(vec, list) and len(vec) >= 1, "sigma_vec must be a non-empty list")
            need(all(_is_int(s) and 2 <= s <= self.n for s in vec),
                 "every sigma_vec entry must satisfy 2 <= s <= n")
        if exp in ("le_implicit", "le_explicit"):
            need(self.epsilon < 0.5, "leader election needs epsilon in (0, 1/2)")
        if exp == "lowerbound":
            need(_is_int(self.sigma) and self.sigma >= 2, "sigma is required")
            need(_is_int(self.f) and self.f >= 0, "f must be a non-negative integer")
            need(_is_int(self.trials) and self.trials >= 1, "trials must be >= 1")
            need(self.mode in ("bernoulli", "mechanistic"), f"unknown mode {self.mode!r}")
        if self.injections is not None:
            need(isinstance(self.injections, (list, dict)), "injections must be a list or object")
            if isinstance(self.injections, dict):
                need(len(self.injections) == 1 and
                     next(iter(self.injections)) in ("random", "spread"),
                     "injection generator must be {'random': {...}} or {'spread': {...}}")

    # -- derived values -------------------------------------------------
    def seed_list(self) -> list[int]:
        if self.seeds is None:
            return [self.seed]
        if len(self.seeds) == 2 and self.seeds[0] <= self.seeds[1]:
            return list(range(self.seeds[0], self.seeds[1] + 1))
        return list(self.seeds)

    @property
    def team_size(self) -> int:
        if self.experiment == "dtc":
            return self.threshold if self.threshold is not None else self.sigma
        if self.experiment in ("le_implicit", "le_explicit"):
            return sigma_le(self.n, self.epsilon, self.c_le)
        return self.sigma

    def horizon(self) -> float:
        """Default simulated-time limit ``100 (sigma + ln n)``."""
        if self.max_sim_time is not None:
            return self.max_sim_time
        s = self.team_size or max(self.sigma_vec or [2])
        return 100 * (s + math.log(self.n))


def sigma_le(n: int, epsilon: float, c_le: float) -> int:
    """Team size of the leader-election reduction."""
    return math.ceil((1 - epsilon / 2) * (0.5 + epsilon) * c_le * math.log(n) - 1e-9)


def candidate_probability(n: int, c_le: float) -> float:
    return min(1.0, c_le * math.log(n) / n)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)
