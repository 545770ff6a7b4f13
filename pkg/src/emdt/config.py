"""Run configuration: nested YAML with dotted-name overrides."""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import re

import yaml


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` style exponents as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _yaml(text: str):
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    """Bad configuration value or unknown key (exit status 2)."""


DEFAULTS: dict = {
    "data": {
        "path": "creditcard.csv",
        "fractions": [0.6, 0.2, 0.2],
        "split_seed": 0,
        "expected_rows": None,  # e.g. 284807 to insist on the full public file
    },
    "embedding": {"dim": 128, "feature_scale": 500.0, "time_scale": 0.5},
    "denoiser": {"heads": 2, "ff_dim": None, "norm": "none"},
    "diffusion": {
        "steps": 1000,
        "beta_start": 0.001,
        "beta_end": 0.02,
        "epochs": 150,
        "batch_size": 64,
        "lr": 0.003,
        "lr_decay": "linear",
        "ema_decay": 0.99,
        "literal_posterior": False,
    },
    "clustering": {"n_clusters": 3, "n_neighbors": 15, "epochs": 500, "seed": 0},
    "augment": {"multiplier": 1.0, "smote_k": 5},
    "classifier": {
        "n_trees": [100, 200, 400],
        "max_depth": [4, 6, 8],
        "learning_rate": [0.05, 0.1],
        "reg_lambda": 1.0,
        "gamma": 0.0,
        "min_child_weight": 1.0,
        "threshold": 0.5,
    },
    "evaluation": {
        "seeds": 10,
        "base_seed": 0,
        "arms": ["original", "smote", "emdt", "emdt_no_cluster"],
        "bins": 50,
    },
    "sweep": {
        "lr": [1e-5, 1e-4, 1e-3, 3e-3],
        "batch_size": [64, 128, 256],
        "dim": [32, 64, 128],
        "feature_scale": [1, 10, 50, 100, 500],
        "time_scale": [0.5, 1, 2],
        "seeds": 3,
    },
    "output": {"dir": "runs/emdt", "canonical": False, "figures": True},
}

ARMS = ("original", "smote", "emdt", "emdt_no_cluster")
SWEEP_FACTORS = {
    "lr": "diffusion.lr",
    "batch_size": "diffusion.batch_size",
    "dim": "embedding.dim",
    "feature_scale": "embedding.feature_scale",
    "time_scale": "embedding.time_scale",
}


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def get(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def set_value(cfg: dict, dotted: str, value) -> None:
    *parents, leaf = dotted.split(".")
    node = cfg
    for part in parents:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[part]
    if leaf not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[leaf] = value


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for k, v in update.items():
        if k not in base:
            raise ConfigError(f"unknown config key {prefix + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{prefix + k!r} must be a mapping")
            _merge(base[k], v, prefix + k + ".")
        else:
            base[k] = v


def parse_scalar(text: str):
    """Parse a command-line value with YAML rules (numbers, lists, null, booleans)."""
    try:
        return _yaml(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from exc


def load(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = _yaml(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(cfg, doc)
    for key, value in (overrides or {}).items():
        set_value(cfg, key, value)
    validate(cfg)
    return cfg


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(cfg: dict) -> None:
    d = cfg["data"]
    _require(len(d["fractions"]) == 3 and abs(sum(d["fractions"]) - 1) < 1e-9
             and min(d["fractions"]) >= 0, "data.fractions must be 3 non-negative numbers summing to 1")
    e = cfg["embedding"]
    _require(int(e["dim"]) > 0 and int(e["dim"]) % 2 == 0, "embedding.dim must be a positive even integer")
    _require(int(e["dim"]) % int(cfg["denoiser"]["heads"]) == 0, "denoiser.heads must divide embedding.dim")
    _require(cfg["denoiser"]["norm"] in ("pre", "post", "none"), "denoiser.norm must be pre, post or none")
    f = cfg["diffusion"]
    _require(int(f["steps"]) >= 1, "diffusion.steps must be >= 1")
    _require(0 < f["beta_start"] <= f["beta_end"] < 1, "need 0 < diffusion.beta_start <= beta_end < 1")
    _require(int(f["epochs"]) >= 0 and int(f["batch_size"]) >= 1, "diffusion.epochs >= 0 and batch_size >= 1")
    _require(f["lr"] > 0, "diffusion.lr must be positive")
    _require(f["lr_decay"] in ("none", "linear"), "diffusion.lr_decay must be none or linear")
    c = cfg["clustering"]
    _require(int(c["n_clusters"]) >= 1 and int(c["n_neighbors"]) >= 2, "clustering needs n_clusters >= 1, n_neighbors >= 2")
    _require(cfg["augment"]["multiplier"] >= 0, "augment.multiplier must be >= 0")
    g = cfg["classifier"]
    for key in ("n_trees", "max_depth", "learning_rate"):
        _require(isinstance(g[key], list) and len(g[key]) > 0, f"classifier.{key} must be a non-empty list")
    v = cfg["evaluation"]
    _require(int(v["seeds"]) >= 1, "evaluation.seeds must be >= 1")
    bad = [a for a in v["arms"] if a not in ARMS]
    _require(not bad, f"unknown evaluation arms {bad}; choose from {list(ARMS)}")


def digest(obj) -> str:
    """Stable short hash of any JSON-serializable value."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def dump(cfg: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=False))
