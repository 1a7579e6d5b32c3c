"""Experiment harness: JSON configs in, seeded episode CSVs out."""

from .config import ExperimentConfig, IqlConfig, load_config, parse_config, parse_experiment
from .runner import (CSV_HEADER, EpisodeRecord, emit_csv, read_csv, run_episode, run_experiment, summarize,
                     summarize_rows)

__all__ = [
    "CSV_HEADER", "EpisodeRecord", "ExperimentConfig", "IqlConfig", "emit_csv", "load_config", "parse_config",
    "parse_experiment", "read_csv", "run_episode", "run_experiment", "summarize", "summarize_rows",
]
