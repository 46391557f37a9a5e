"""JSON run configuration with documented defaults and strict key checking."""
from __future__ import annotations

import copy
import json
from pathlib import Path

DEFAULTS = {
    "variant": 1,
    "server_front": "quantum",
    "circuit_id": 6,
    "dataset": {"synthetic": "blobs", "n": 1000, "dims": 7, "classes": 2, "separation": 4.0},
    "folds": 5,
    "test_fold": 0,
    "epochs": 20,
    "lr": 0.001,
    "batch_size": 32,
    "optimizer": "adam",
    "seed": 0,
    "clients": 1,
    "transport": "inprocess",
    "eval_mode": "analytic",
    "shots": 1000,
    "noise": {"p1": 0.0, "p2": 0.0, "trajectories": 1},
    "defense": None,
    "attack": {"model_id": [1, 2, 3], "epochs": 20, "batch_size": 32},
}

DOCS = {
    "variant": "1 = tabular binary classifier, 2 = 28x28 image classifier",
    "server_front": "'quantum' (circuit layer) or 'classical' (Dense(3,2)+ReLU)",
    "circuit_id": "catalog circuit 1..10 used by the quantum front",
    "dataset": "CSV path, {'csv': path, 'label_column': -1, 'pca': 7}, "
    "{'idx_images': path, 'idx_labels': path}, or {'synthetic': 'blobs'|'moons'|'shapes', 'n': ..., ...}",
    "folds": "number of stratified folds (one is held out)",
    "test_fold": "index of the held-out fold",
    "epochs": "global training epochs",
    "lr": "learning rate for client, server and circuit parameters",
    "batch_size": "mini-batch size inside each local epoch",
    "optimizer": "adam | sgd | rmsprop",
    "seed": "master seed (model init, shuffling, sharding)",
    "clients": "number of round-robin clients K",
    "transport": "'inprocess' or 'tcp://host:port'",
    "eval_mode": "analytic | shots",
    "shots": "shots per circuit evaluation in shot mode",
    "noise": "depolarizing noise at evaluation: p1 (1-qubit), p2 (CZ), trajectories averaged",
    "defense": "null or {'mu_over_pi': ..., 'b': ..., 'seed': 0}; applied at inference",
    "attack": "model_id (int or list of 1..3), epochs, batch_size for decoder training",
}

_NESTED_DEFAULTS = {
    "noise": DEFAULTS["noise"],
    "attack": DEFAULTS["attack"],
    "defense": {"mu_over_pi": 4.0, "b": 0.01, "seed": 0},
}


class ConfigError(ValueError):
    pass


def _merge_nested(key, value):
    if value is None:
        if key == "defense":
            return None
        raise ConfigError(f"'{key}' cannot be null")
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be an object")
    allowed = _NESTED_DEFAULTS[key]
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{key}': {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(value)
    if key == "defense" and not {"mu_over_pi", "b"} <= set(value):
        raise ConfigError("defense needs both 'mu_over_pi' and 'b'")
    return merged


def resolve(raw: dict) -> dict:
    """Fill defaults and reject unknown or ill-typed keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        cfg[key] = _merge_nested(key, value) if key in _NESTED_DEFAULTS else value
    _validate(cfg)
    return cfg


def _validate(cfg):
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg["variant"] in (1, 2), "variant must be 1 or 2")
    need(cfg["server_front"] in ("quantum", "classical"), "server_front must be quantum or classical")
    need(isinstance(cfg["circuit_id"], int) and 1 <= cfg["circuit_id"] <= 10, "circuit_id must be 1..10")
    for k in ("folds", "epochs", "batch_size", "clients", "shots"):
        need(isinstance(cfg[k], int) and cfg[k] >= 1, f"{k} must be a positive integer")
    need(cfg["folds"] >= 2, "folds must be >= 2")
    need(0 <= cfg["test_fold"] < cfg["folds"], "test_fold must index a fold")
    need(isinstance(cfg["lr"], (int, float)) and cfg["lr"] >= 0, "lr must be >= 0")
    need(cfg["optimizer"] in ("adam", "sgd", "rmsprop"), "optimizer must be adam, sgd or rmsprop")
    need(cfg["eval_mode"] in ("analytic", "shots"), "eval_mode must be analytic or shots")
    need(cfg["transport"] == "inprocess" or str(cfg["transport"]).startswith("tcp://"),
         "transport must be 'inprocess' or 'tcp://host:port'")
    need(isinstance(cfg["dataset"], (str, dict)), "dataset must be a path or an object")
    noise = cfg["noise"]
    need(0 <= noise["p1"] <= 1 and 0 <= noise["p2"] <= 1, "noise probabilities must be in [0, 1]")
    need(isinstance(noise["trajectories"], int) and noise["trajectories"] >= 1, "noise.trajectories must be >= 1")
    if cfg["defense"] is not None:
        need(cfg["defense"]["b"] > 0, "defense.b must be > 0")
    ids = cfg["attack"]["model_id"]
    ids = ids if isinstance(ids, list) else [ids]
    need(all(i in (1, 2, 3) for i in ids), "attack.model_id must be 1, 2, 3 or a list of them")


def load(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(raw)


def describe() -> str:
    lines = ["run-config keys (JSON) and defaults:"]
    for key, value in DEFAULTS.items():
        lines.append(f"  {key} = {json.dumps(value)}")
        lines.append(f"      {DOCS[key]}")
    return "\n".join(lines)
