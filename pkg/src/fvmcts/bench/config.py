"""Experiment configuration files.

A config file is a JSON object describing one experiment cell::

    {
      "domain": {"name": "sysadmin", "topology": "ring", "n_agents": 8},
      "algorithm": {"name": "fvmcts_maxplus", "flags": "TTF"},
      "planner": {"iterations": 4000, "depth": 20, "exploration": 20.0},
      "seeds": [0, 1, 2],
      "max_steps": 50
    }

or an object with an ``"experiments"`` list of such cells, each deep-merged
over an optional ``"defaults"`` object. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

from ..domains import make_domain
from ..maxplus import MaxPlusConfig
from ..planner import ConfigurationError, DynamicGraphError, PlannerConfig

ALGORITHMS = ("fvmcts_maxplus", "fvmcts_varel", "naive_mcts", "iql", "random")
DEFAULT_MAX_STEPS = {"sysadmin": 50, "drones": 100}


@dataclass
class IqlConfig:
    episodes: int = 10_000
    alpha: float = 0.1
    epsilon: float = 0.1
    max_steps: Optional[int] = None


@dataclass
class ExperimentConfig:
    domain: dict
    algorithm: str
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    seeds: list = field(default_factory=lambda: list(range(10)))
    max_steps: Optional[int] = None
    memory_cap: Optional[int] = 10 ** 6
    iql: IqlConfig = field(default_factory=IqlConfig)
    record_timing: bool = True
    label: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if len(self.seeds) < 1:
            raise ConfigurationError("need at least one episode")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds must be distinct")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigurationError("seeds must be non-negative integers")
        if self.max_steps is None:
            self.max_steps = DEFAULT_MAX_STEPS.get(self.domain.get("name"), 50)
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")
        if self.memory_cap is not None and self.memory_cap < 1:
            raise ConfigurationError("memory_cap must be positive")
        try:
            model = make_domain(self.domain)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad domain: {exc}") from exc
        if self.algorithm == "fvmcts_varel" and model.dynamic_graph:
            raise DynamicGraphError(
                f"fvmcts_varel needs a static coordination graph; {model.name} builds one per state")
        if self.algorithm == "iql" and not hasattr(model, "local_states"):
            raise ConfigurationError(f"iql needs a local state view, which {model.name} lacks")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.algorithm == "fvmcts_maxplus":
            return f"fvmcts_maxplus-{self.planner.maxplus.flags}"
        return self.algorithm

    @property
    def episodes(self) -> int:
        return len(self.seeds)

    def make_model(self):
        return make_domain(self.domain)


def _check_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown {where} keys: {sorted(unknown)}")


def _planner_config(d: dict, backend: str, flags: Optional[str]) -> PlannerConfig:
    d = dict(d)
    allowed = {f.name for f in fields(PlannerConfig)} - {"backend"}
    _check_keys(d, allowed, "planner")
    mp = d.pop("maxplus", {}) or {}
    if not isinstance(mp, dict):
        raise ConfigurationError("planner.maxplus must be an object")
    _check_keys(mp, {f.name for f in fields(MaxPlusConfig)}, "planner.maxplus")
    try:
        mp_cfg = MaxPlusConfig.from_flags(flags, **mp) if flags else MaxPlusConfig(**mp)
        return PlannerConfig(backend=backend, maxplus=mp_cfg, **d)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad planner settings: {exc}") from exc


def parse_experiment(d: dict) -> ExperimentConfig:
    """Validate one experiment cell given as a plain dict."""
    if not isinstance(d, dict):
        raise ConfigurationError("an experiment must be a JSON object")
    _check_keys(d, {"domain", "algorithm", "planner", "seeds", "episodes", "max_steps", "memory_cap", "iql",
                    "record_timing", "label"}, "experiment")
    if "domain" not in d or "algorithm" not in d:
        raise ConfigurationError("an experiment needs 'domain' and 'algorithm'")
    domain = d["domain"]
    if not isinstance(domain, dict):
        raise ConfigurationError("'domain' must be an object")
    algo = d["algorithm"]
    flags = None
    if isinstance(algo, dict):
        _check_keys(algo, {"name", "flags"}, "algorithm")
        flags = algo.get("flags")
        algo = algo.get("name")
    if not isinstance(algo, str):
        raise ConfigurationError("'algorithm' must be a name or an object with a name")
    if flags is not None and algo != "fvmcts_maxplus":
        raise ConfigurationError("flags only apply to fvmcts_maxplus")
    backend = "varel" if algo == "fvmcts_varel" else "maxplus"
    planner = _planner_config(d.get("planner", {}) or {}, backend, flags)

    if "seeds" in d:
        seeds = d["seeds"]
        if not isinstance(seeds, list):
            raise ConfigurationError("'seeds' must be a list of integers")
        if "episodes" in d and d["episodes"] != len(seeds):
            raise ConfigurationError("'episodes' disagrees with the number of seeds")
    else:
        episodes = d.get("episodes", 10)
        if not isinstance(episodes, int) or episodes < 1:
            raise ConfigurationError("'episodes' must be a positive integer")
        seeds = list(range(episodes))

    iql = d.get("iql", {}) or {}
    _check_keys(iql, {f.name for f in fields(IqlConfig)}, "iql")
    return ExperimentConfig(
        domain=dict(domain),
        algorithm=algo,
        planner=planner,
        seeds=list(seeds),
        max_steps=d.get("max_steps"),
        memory_cap=d.get("memory_cap", 10 ** 6),
        iql=IqlConfig(**iql),
        record_timing=bool(d.get("record_timing", True)),
        label=d.get("label"),
    )


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(data: Any) -> list[ExperimentConfig]:
    """Parse a config document into its experiment cells."""
    if isinstance(data, dict) and "experiments" in data:
        _check_keys(data, {"experiments", "defaults"}, "config")
        defaults = data.get("defaults", {}) or {}
        cells = data["experiments"]
        if not isinstance(cells, list) or not cells:
            raise ConfigurationError("'experiments' must be a non-empty list")
        return [parse_experiment(_merge(defaults, c)) for c in cells]
    return [parse_experiment(data)]


def load_config(source: Union[str, Path, dict]) -> list[ExperimentConfig]:
    if isinstance(source, dict):
        return parse_config(source)
    try:
        with open(source) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {source}: {exc}") from exc
    return parse_config(data)
