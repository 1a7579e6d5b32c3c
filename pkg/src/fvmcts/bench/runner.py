"""Seeded episode runs, CSV output and per-cell summaries."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np

from ..baselines import MemoryGuardError, NaiveMCTS, iql_act, iql_train, random_policy
from ..planner import FactoredValueMCTS
from ..varel import InducedWidthError
from .config import ExperimentConfig

CSV_HEADER = ["algo", "domain", "topology", "n_agents", "seed", "return", "mean_ms_per_action",
              "peak_stats_entries", "steps", "failed"]


@dataclass
class EpisodeRecord:
    algo: str
    domain: str
    topology: str
    n_agents: int
    seed: int
    ret: float
    step_ms: list = field(default_factory=list)
    peak_entries: int = 0
    terminal: bool = False
    steps: int = 0
    failed: bool = False
    error: str = ""

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.step_ms)) if self.step_ms else math.nan


class _Agent:
    """Uniform ``act(state)`` wrapper around every algorithm."""

    def __init__(self, cfg: ExperimentConfig, model, rng: np.random.Generator):
        self.cfg = cfg
        self.model = model
        self.rng = rng
        self.peak = 0
        algo = cfg.algorithm
        if algo in ("fvmcts_maxplus", "fvmcts_varel"):
            self.planner = FactoredValueMCTS(model, cfg.planner, rng)
        elif algo == "naive_mcts":
            self.planner = NaiveMCTS(model, cfg.planner, rng, cfg.memory_cap)
        elif algo == "iql":
            iq = cfg.iql
            self.tables = iql_train(model, iq.episodes, iq.alpha, iq.epsilon,
                                    iq.max_steps or cfg.max_steps, rng=rng)
            self.peak = int(self.tables.q.size)

    def act(self, state) -> np.ndarray:
        algo = self.cfg.algorithm
        if algo in ("fvmcts_maxplus", "fvmcts_varel"):
            try:
                return self.planner.plan(state)
            finally:
                if self.planner.store is not None:
                    self.peak = max(self.peak, self.planner.store.peak_entries)
        if algo == "naive_mcts":
            try:
                return self.planner.plan(state)
            finally:
                self.peak = max(self.peak, self.planner.peak_entries)
        if algo == "iql":
            return iql_act(self.tables, self.model, state)
        return random_policy(self.model, state, self.rng)


def run_episode(cfg: ExperimentConfig, seed: int) -> EpisodeRecord:
    """Roll out one episode; statistics-budget failures become a flagged record."""
    model = cfg.make_model()
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    env_rng = np.random.default_rng(env_ss)
    agent_rng = np.random.default_rng(agent_ss)
    gamma = model.gamma if cfg.planner.gamma is None else cfg.planner.gamma
    rec = EpisodeRecord(cfg.name, model.name, model.topology, model.n_agents, seed, 0.0)
    state = model.initial_state(env_rng)
    agent = None
    try:
        agent = _Agent(cfg, model, agent_rng)
        discount = 1.0
        for _ in range(cfg.max_steps):
            if model.is_terminal(state):
                break
            t0 = time.perf_counter()
            action = agent.act(state)
            rec.step_ms.append((time.perf_counter() - t0) * 1e3)
            state, r = model.sample_step(state, action, env_rng)
            rec.ret += discount * float(np.sum(r))
            discount *= gamma
            rec.steps += 1
        rec.terminal = bool(model.is_terminal(state))
    except (MemoryGuardError, InducedWidthError) as exc:
        rec.failed = True
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.ret = math.nan
    if agent is not None:
        rec.peak_entries = agent.peak
    if not cfg.record_timing:
        rec.step_ms = [math.nan] * rec.steps
    return rec


def _run_cell(args):
    cfg, seed = args
    return run_episode(cfg, seed)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[EpisodeRecord]:
    """One record per seed, in seed order regardless of ``jobs``."""
    seeds = sorted(cfg.seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, [(cfg, s) for s in seeds]))
    else:
        records = [run_episode(cfg, s) for s in seeds]
    return records


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def write_csv(records: Iterable[EpisodeRecord], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.algo, r.domain, r.topology, r.n_agents, r.seed, _fmt(r.ret), _fmt(r.mean_ms),
                         r.peak_entries, r.steps, int(r.failed)])


def emit_csv(records: Iterable[EpisodeRecord], path) -> None:
    """Write records grouped by cell in first-appearance order, seed-sorted within a cell."""
    records = list(records)
    cells: dict = {}
    for r in records:
        cells.setdefault((r.algo, r.domain, r.topology, r.n_agents), []).append(r)
    ordered = [r for group in cells.values() for r in sorted(group, key=lambda r: r.seed)]
    with open(path, "w", newline="") as fh:
        write_csv(ordered, fh)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


@dataclass
class CellSummary:
    algo: str
    domain: str
    n_agents: int
    count: int
    failed: int
    return_mean: float
    return_std: float
    ms_mean: float
    ms_std: float


def _mean_std(xs: list) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    if len(xs) == 1:
        return xs[0], 0.0
    a = np.asarray(xs, dtype=float)
    return float(a.mean()), float(a.std(ddof=1))


def summarize_rows(rows: Iterable[dict]) -> list[CellSummary]:
    """Mean and sample stddev per (algo, domain, n_agents); failed episodes are left out.

    A cell in which every episode failed reports NaN.
    """
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["algo"], row["domain"], int(row["n_agents"])), []).append(row)
    out = []
    for (algo, domain, n), group in sorted(groups.items()):
        ok = [r for r in group if r["failed"] == "0"]
        rm, rs = _mean_std([float(r["return"]) for r in ok])
        mm, ms = _mean_std([float(r["mean_ms_per_action"]) for r in ok])
        out.append(CellSummary(algo, domain, n, len(group), len(group) - len(ok), rm, rs, mm, ms))
    return out


def summarize(paths, out: Optional[TextIO] = None) -> list[CellSummary]:
    """Print a per-cell table of return and time per action for the given CSV files."""
    rows = [row for p in paths for row in read_csv(p)]
    cells = summarize_rows(rows)
    lines = [f"{'algo':<24} {'domain':<9} {'n':>3} {'runs':>4} {'failed':>6} "
             f"{'return':>22} {'ms/action':>22}"]
    for c in cells:
        lines.append(f"{c.algo:<24} {c.domain:<9} {c.n_agents:>3} {c.count:>4} {c.failed:>6} "
                     f"{_fmt(c.return_mean):>10} ± {_fmt(c.return_std):<9} "
                     f"{_fmt(c.ms_mean):>10} ± {_fmt(c.ms_std):<9}")
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return cells
