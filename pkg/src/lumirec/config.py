"""Workspace configuration: JSON file over defaults, flag overrides on top.

Every stochastic stage draws from the single global seed via named
derivations, and the effective config's digest is stamped into every
artifact manifest so mixed-config workspaces are detectable.
"""

from __future__ import annotations

import copy
import json
from datetime import date
from pathlib import Path

from .util import config_digest

DEFAULT_SEED = 7

DEFAULT_CONFIG: dict = {
    "seed": DEFAULT_SEED,
    "scene_count": 9,
    "threads": 1,
    "study": {"start": "2019-01-01", "end": "2019-12-31"},
    "synth": {
        "households": 600,
        "personas": None,          # path to a persona spec JSON; null = built-in population
        "jitter_minutes": 10,
        "noise_rate": 0.5,
        "flip_probability": 0.1,
    },
    "ingest": {
        "events": None,            # external events.ndjson; null = synth artifact
        "stale_on_cap_hours": 24.0,
    },
    "routine": {
        "merge_gap": 15,
        "min_len": 10,
        "write_profiles": True,
    },
    "clustering": {
        "k_min": 1,
        "k_max": 10,
        "n_init": 10,
        "tol": 1e-6,
        "max_iter": 300,
    },
    "train": {
        "folds": 3,
        "grid_rows_cap": 25000,
        "grids": {
            "random_forest": {"n_trees": [50, 100], "max_depth": [4, 8]},
            "gradient_boost": {"n_trees": [25], "max_depth": [4],
                               "learning_rate": [0.1, 0.3]},
            "knn": {"n_neighbors": [5, 11]},
        },
    },
    "eval": {
        "test_frac": 0.1,
        "folds": 5,
        "clustered_family": "random_forest",
    },
    "coldstart": {
        "scenarios": [0.10, 0.25, 0.40],
        "iterations": 20,
        "folds": 5,
        "train_rows_cap": 25000,
        "clustered": True,
        "spec": {"family": "random_forest",
                 "params": {"n_trees": 10, "max_depth": 8, "min_leaf": 4}},
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Path | None = None, overrides: dict | None = None) -> dict:
    """Effective config: defaults <- config file <- flag overrides."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        config = _deep_merge(config, json.loads(Path(path).read_text()))
    if overrides:
        config = _deep_merge(config, overrides)
    return config


def effective_hash(config: dict) -> str:
    """Digest of the outcome-relevant config.

    ``threads`` only controls execution parallelism, never results, so it
    stays out of the hash: runs at different thread counts are the same
    experiment.
    """
    hashed = {k: v for k, v in config.items() if k != "threads"}
    return config_digest(hashed)


def study_window(config: dict) -> tuple[date, date]:
    return (date.fromisoformat(config["study"]["start"]),
            date.fromisoformat(config["study"]["end"]))
