"""Reconstruction attack by an honest-but-curious server.

The adversary trains a decoder from smashed data back to images using pairs
produced by a shadow copy of the client network, then runs the decoder on
the (possibly noise-defended) smashed data of private inputs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import defense as dfn
from .imgmetrics import METRICS, batch_metrics
from .neural import (
    BatchNorm,
    Conv2D,
    Dense,
    ReLU,
    Reshape,
    Residual,
    Sequential,
    TransposeConv2D,
    Upsample2D,
    loss,
    make_optimizer,
)

IMAGE_SHAPE = (1, 28, 28)
DECODER_CHANNELS = 16
REPORT_COLUMNS = ("attack_model", "mu", "b", "metric", "value", "baseline")


@dataclass
class AttackDataset:
    z: np.ndarray
    x: np.ndarray
    index: Optional[np.ndarray] = None

    def __len__(self):
        return self.z.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx)
        return AttackDataset(self.z[idx], self.x[idx], None if self.index is None else self.index[idx])


@dataclass
class ReconstructionModel:
    model_id: int
    network: Sequential
    loss_kind: str
    optimizer: str
    lr: float
    momentum: float = 0.0

    def reconstruct(self, z):
        out = self.network.forward(np.asarray(z, dtype=np.float64), training=False)
        return out.reshape((-1,) + IMAGE_SHAPE)


def generate_shadow_pairs(client, images, index=None) -> AttackDataset:
    """Smashed data of ``images`` from the frozen client stack (inference mode)."""
    images = np.asarray(images, dtype=np.float64)
    z = client.forward(images, training=False)
    return AttackDataset(z, images.copy(), None if index is None else np.asarray(index))


def split_attack_data(n: int, seed: int = 0, ratio: int = 4):
    """Disjoint X_rec / X_inf index sets in a ``ratio``:1 proportion."""
    order = np.random.default_rng(seed).permutation(n)
    cut = n * ratio // (ratio + 1)
    return np.sort(order[:cut]), np.sort(order[cut:])


def _decoder_block(c_in, c_out, rng, tag, skip: bool):
    main = Sequential(
        [
            Upsample2D(2),
            TransposeConv2D(c_in, c_out, 3, stride=1, padding=1, rng=rng, name=f"{tag}.tconv"),
            BatchNorm(c_out, name=f"{tag}.bn"),
        ]
    )
    if skip:
        path = Sequential([Upsample2D(2), Conv2D(c_in, c_out, 1, rng=rng, name=f"{tag}.skip")])
        return [Residual(main, path), ReLU()]
    return [main, ReLU()]


def _conv_decoder(rng, skip: bool):
    c = DECODER_CHANNELS
    layers = [Dense(3, c * 7 * 7, rng, name="dec.in"), Reshape(c, 7, 7)]
    layers += _decoder_block(c, c, rng, "dec.b0", skip)
    layers += _decoder_block(c, c, rng, "dec.b1", skip)
    layers += [TransposeConv2D(c, 1, 3, stride=1, padding=1, rng=rng, name="dec.out")]
    return Sequential(layers, "decoder")


def build_attack_model(model_id: int, seed: int = 0) -> ReconstructionModel:
    rng = np.random.default_rng(seed)
    if model_id == 1:
        return ReconstructionModel(1, _conv_decoder(rng, skip=True), "L1", "sgd", 1e-3, momentum=0.9)
    if model_id == 2:
        return ReconstructionModel(2, _conv_decoder(rng, skip=False), "MSE", "adam", 1e-3)
    if model_id == 3:
        net = Sequential(
            [
                Dense(3, 1000, rng, name="mlp.0"), ReLU(),
                Dense(1000, 1000, rng, name="mlp.1"), ReLU(),
                Dense(1000, 784, rng, name="mlp.2"),
                Reshape(*IMAGE_SHAPE),
            ],
            "decoder",
        )
        return ReconstructionModel(3, net, "L1+MSE", "rmsprop", 1e-3)
    raise ValueError(f"unknown attack model {model_id}")


def train_attack(model: ReconstructionModel, pairs: AttackDataset, epochs: int = 20, batch_size: int = 32,
                 seed: int = 0, lr: Optional[float] = None):
    """Mini-batch training; returns the per-epoch mean loss trace."""
    if len(pairs) == 0:
        raise ValueError("attack training set is empty")
    lr = model.lr if lr is None else lr
    kw = {"momentum": model.momentum} if model.optimizer == "sgd" else {}
    opt = make_optimizer(model.optimizer, model.network.parameters(), lr=lr, **kw)
    rng = np.random.default_rng(seed)
    trace = []
    for _ in range(epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            out = model.network.forward(pairs.z[idx], training=True)
            value, grad = loss(model.loss_kind, out, pairs.x[idx].reshape(out.shape))
            model.network.backward(grad)
            opt.step()
            total += value * len(idx)
        trace.append(total / len(pairs))
    return trace


def evaluate_attack(model: ReconstructionModel, x_inf, client, defense: Optional[dfn.LaplaceNoiseConfig] = None,
                    batch_size: int = 256) -> dict:
    """Mean metrics of reconstructions from (optionally defended) smashed data.

    Returns ``{"defended": {...}, "baseline": {...}}``; with no defense the two agree.
    """
    x_inf = np.asarray(x_inf, dtype=np.float64)
    clean, noisy = [], []
    for b, start in enumerate(range(0, len(x_inf), batch_size)):
        z = client.forward(x_inf[start : start + batch_size], training=False)
        clean.append(model.reconstruct(z))
        zt = dfn.apply_noise(z, defense, b) if defense is not None else z
        noisy.append(model.reconstruct(zt))
    baseline = batch_metrics(x_inf, np.concatenate(clean))
    defended = batch_metrics(x_inf, np.concatenate(noisy)) if defense is not None else dict(baseline)
    return {"defended": defended, "baseline": baseline}


def sweep_rows(model: ReconstructionModel, x_inf, client, seed: int = 0, grid=None):
    """Report rows for every grid point plus one baseline row per metric."""
    grid = dfn.sweep_grid() if grid is None else grid
    rows = []
    base = None
    for mu, b in grid:
        rep = evaluate_attack(model, x_inf, client, dfn.LaplaceNoiseConfig(mu, b, seed))
        base = rep["baseline"]
        for metric in METRICS:
            rows.append(
                {"attack_model": model.model_id, "mu": mu, "b": b, "metric": metric,
                 "value": rep["defended"][metric], "baseline": base[metric]}
            )
    if base is None:
        base = evaluate_attack(model, x_inf, client)["baseline"]
    for metric in METRICS:
        rows.append({"attack_model": model.model_id, "mu": "none", "b": "none", "metric": metric,
                     "value": base[metric], "baseline": base[metric]})
    return rows


def write_report(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        w.writerows(rows)
