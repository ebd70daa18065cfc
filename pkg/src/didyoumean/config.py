"""One config file for every experiment.

The file is TOML or JSON (picked by extension, with a content sniff as
fallback) and deep-merges over DEFAULTS, so a config needs to state only
what it changes. DEFAULTS doubles as the schema documentation: every
recognized key appears there with its default value.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

DEFAULTS = {
    # Master seed; --seed on any subcommand overrides it.
    "seed": 0,
    "corpus": {
        # Examples per split; splits are disjoint by utterance.
        "sizes": {"train": 5000, "validation": 500, "test": 500},
        # Fraction of examples with a non-empty dialogue history.
        "context_rate": 0.35,
        # Per-split utterance noise.
        "noise": {
            "train": {"typo_rate": 0.05, "synonym_rate": 0.03},
            "validation": {"typo_rate": 0.20, "synonym_rate": 0.10},
            "test": {"typo_rate": 0.20, "synonym_rate": 0.10},
        },
    },
    "model": {
        "alpha": 0.1,
        "temperature": 1.0,
        "top_k": 5,
        "max_len": 64,
    },
    "hitl": {
        # Query thresholds; 1.01 forces a query at every step.
        "thresholds": [i / 10 for i in range(11)] + [1.01],
        "split": "validation",
    },
    "selective": {
        "tau": 0.72,
        "mode": "chosen",
        "user": "oracle",
        "epsilon": 0.0,
        "split": "test",
    },
    "gloss": {
        "beam": 5,
        "split": "test",
    },
    "calibration": {
        "n_bins": 10,
        "split": "validation",
    },
    "sample_study": {
        "n_bins": 10,
        "per_bin": 10,
        "max_conf": 0.6,
        "split": "test",
    },
    "session": {
        "quorum": 3,
        "tau": 0.72,
        "mode": "confirm-chosen",
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8000,
        # Directory for per-session JSONL event logs; empty disables.
        "log_dir": "",
    },
}

__all__ = ["DEFAULTS", "load_config"]


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None) -> dict:
    """DEFAULTS merged with the given TOML or JSON file, if any."""
    config = copy.deepcopy(DEFAULTS)
    if path is None:
        return config
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        loaded = json.loads(raw)
    elif path.suffix == ".toml":
        loaded = tomllib.loads(raw.decode("utf-8"))
    else:
        try:
            loaded = json.loads(raw)
        except json.JSONDecodeError:
            loaded = tomllib.loads(raw.decode("utf-8"))
    if not isinstance(loaded, dict):
        raise ValueError(f"config root must be a table/object: {path}")
    return _merge(config, loaded)
