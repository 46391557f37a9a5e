"""Experiment recipes shared by the command line and the demo scripts."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import attack as atk
from . import dataio, qlayer, qsim
from . import defense as dfn
from .models import VariantConfig, build_model
from .neural.checkpoint import decode_tensors
from .splitproto import TrainPlan, evaluate, shard_iid, train_multi

log = logging.getLogger(__name__)


def load_dataset(cfg: dict) -> dataio.Dataset:
    spec = cfg["dataset"]
    seed = cfg["seed"]
    if isinstance(spec, str):
        spec = {"csv": spec}
    spec = dict(spec)
    if "csv" in spec:
        path = Path(spec.pop("csv"))
        if not path.exists():
            raise FileNotFoundError(f"dataset file not found: {path}")
        ds = dataio.load_csv(path, label_column=spec.pop("label_column", -1))
        pca = spec.pop("pca", 7)
        _no_extra(spec)
        x = dataio.minmax(ds.features)
        if pca and x.shape[1] > pca:
            x = dataio.fit_pca(x, pca).transform(x)
        return ds.with_features(x)
    if "idx_images" in spec:
        img, lab = Path(spec.pop("idx_images")), Path(spec.pop("idx_labels", ""))
        for p in (img, lab):
            if not p.is_file():
                raise FileNotFoundError(f"dataset file not found: {p}")
        limit = spec.pop("limit", None)
        _no_extra(spec)
        ds = dataio.load_idx(img, lab)
        return ds.subset(np.arange(min(limit, len(ds)))) if limit else ds
    if "synthetic" in spec:
        kind = spec.pop("synthetic")
        n = spec.pop("n", 1000)
        return dataio.make_synthetic(kind, n, seed=seed, **spec)
    raise ValueError(f"cannot interpret dataset spec {cfg['dataset']!r}")


def _no_extra(spec):
    if spec:
        raise ValueError(f"unknown dataset options {sorted(spec)}")


def variant_config(cfg: dict, ds: dataio.Dataset) -> VariantConfig:
    v = cfg["variant"]
    return VariantConfig(
        variant=v,
        num_classes=1 if v == 1 else ds.class_count,
        server_front=cfg["server_front"],
        circuit_id=cfg["circuit_id"],
        input_dim=ds.features.shape[1] if v == 1 else 7,
        seed=cfg["seed"],
        eval_mode=cfg["eval_mode"],
        shots=cfg["shots"],
    )


def defense_config(cfg: dict):
    d = cfg.get("defense")
    if d is None:
        return None
    return dfn.LaplaceNoiseConfig.from_mu_over_pi(d["mu_over_pi"], d["b"], d.get("seed", 0))


def train_plan(cfg: dict, vc: VariantConfig) -> TrainPlan:
    return TrainPlan(
        num_clients=cfg["clients"], epochs=cfg["epochs"], lr=cfg["lr"], batch_size=cfg["batch_size"],
        seed=cfg["seed"], optimizer=cfg["optimizer"], variant=vc, defense=defense_config(cfg),
        transport=cfg["transport"],
    )


def split(cfg: dict, ds: dataio.Dataset):
    return dataio.train_test_split(ds, cfg["test_fold"], cfg["folds"], cfg["seed"])


def run_training(cfg: dict, ds=None, recorder=None):
    """Train per ``cfg``; returns ``(model, rows, train, test)``."""
    ds = load_dataset(cfg) if ds is None else ds
    train, test = split(cfg, ds)
    vc = variant_config(cfg, ds)
    plan = train_plan(cfg, vc)
    shards = shard_iid(train, plan.num_clients, cfg["seed"])
    model, rows = train_multi(plan, shards, test, recorder=recorder)
    return model, rows, train, test


def apply_noise_channel(model, cfg: dict):
    q = model.quantum
    n = cfg["noise"]
    if q is None:
        return
    if n["p1"] == 0 and n["p2"] == 0:
        q.set_noise(None)
    else:
        q.set_noise(qsim.NoiseChannel(n["p1"], n["p2"], rng_seed=cfg["seed"], trajectories=n["trajectories"]))


def rebuild(cfg: dict, ds, checkpoints):
    model = build_model(variant_config(cfg, ds))
    params = model.parameters()
    named = {p.name: p for p in params}
    loaded = set()
    for path in checkpoints:
        for name, value in decode_tensors(Path(path).read_bytes()).items():
            if name not in named:
                raise ValueError(f"{path}: tensor {name!r} does not belong to this model")
            if named[name].value.shape != value.shape:
                raise ValueError(f"{path}: shape mismatch for {name}")
            named[name].value[...] = value
            loaded.add(name)
    missing = set(named) - loaded
    if missing:
        raise ValueError(f"checkpoint(s) lack tensors: {sorted(missing)[:5]}")
    return model


def run_eval(cfg: dict, model, test):
    apply_noise_channel(model, cfg)
    try:
        value, acc, f1 = evaluate(model, test, defense_config(cfg))
    finally:
        if model.quantum is not None:
            model.quantum.set_noise(None)
    return {"loss": value, "accuracy": acc, "f1": f1}


SWEEP_COLUMNS = ("circuit", "num_qubits", "params", "depth", "accuracy", "f1")


def sweep_circuits(cfg: dict, ds=None, circuits=qlayer.CATALOG_IDS):
    """Train one model per catalog circuit plus the classical front on the same split."""
    ds = load_dataset(cfg) if ds is None else ds
    rows = []
    for cid in list(circuits) + ["classical"]:
        c = dict(cfg, server_front="classical" if cid == "classical" else "quantum",
                 circuit_id=cfg["circuit_id"] if cid == "classical" else cid)
        model, hist, _, test = run_training(c, ds)
        _, acc, f1 = evaluate(model, test)
        if cid == "classical":
            row = {"circuit": "classical", "num_qubits": 0, "params": 8, "depth": 0}
        else:
            spec = qlayer.build_catalog_circuit(cid)
            row = {"circuit": cid, "num_qubits": spec.num_qubits, "params": spec.num_params, "depth": spec.depth}
        row.update(accuracy=acc, f1=f1)
        rows.append(row)
        log.info("sweep %s: accuracy %.4f", cid, acc)
    return rows


def attack_images(cfg: dict, model, test):
    """Shadow pairs from the held-out images, split 4:1 into X_rec and X_inf."""
    pairs = atk.generate_shadow_pairs(model.client, test.features, index=np.arange(len(test)))
    rec_idx, inf_idx = atk.split_attack_data(len(pairs), cfg["seed"])
    return pairs.subset(rec_idx), pairs.subset(inf_idx)


def run_attack_sweep(cfg: dict, model, test, grid=None):
    rec, inf = attack_images(cfg, model, test)
    ids = cfg["attack"]["model_id"]
    ids = ids if isinstance(ids, list) else [ids]
    rows = []
    for mid in ids:
        am = atk.build_attack_model(mid, cfg["seed"])
        atk.train_attack(am, rec, epochs=cfg["attack"]["epochs"], batch_size=cfg["attack"]["batch_size"], seed=cfg["seed"])
        rows += atk.sweep_rows(am, inf.x, model.client, seed=cfg["seed"], grid=grid)
    return rows

