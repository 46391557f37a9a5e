"""HQSL variant assemblies: client stack, server front (circuit or dense), server rest."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qlayer
from .neural import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    ReLU,
    Sequential,
    Sigmoid,
)

# hidden widths
V1_CLIENT_WIDTHS = (32, 16, 8)
V1_SERVER_WIDTHS = (16, 16, 8)
V1_DROPOUT = 0.25
V2_CHANNELS = (8, 16)
V2_HIDDEN = 64
V2_SERVER_WIDTHS = (32, 16)
CUT_DIM = 3
FRONT_DIM = 2


@dataclass
class VariantConfig:
    variant: int = 1
    num_classes: int = 1
    server_front: str = "quantum"  # or "classical"
    circuit_id: int = 6
    input_dim: int = 7
    seed: int = 0
    eval_mode: str = "analytic"
    shots: int = 1000

    def __post_init__(self):
        if self.variant not in (1, 2):
            raise ValueError("variant must be 1 or 2")
        if self.server_front not in ("quantum", "classical"):
            raise ValueError("server_front must be 'quantum' or 'classical'")
        if self.variant == 1:
            self.num_classes = 1
        elif self.num_classes < 2:
            raise ValueError("variant 2 needs at least 2 classes")


class SplitModel:
    """Client stack and server stack (front + rest) sharing one set of layer objects."""

    def __init__(self, client: Sequential, server_front: Layer, server_rest: Sequential, config: VariantConfig, cut_dim: int):
        self.client = client
        self.server_front = server_front
        self.server_rest = server_rest
        self.config = config
        self.cut_dim = cut_dim
        self.server = Sequential([server_front, server_rest], name="server")

    @property
    def layers(self):
        return list(self.client.layers) + [self.server_front] + list(self.server_rest.layers)

    def client_parameters(self):
        return self.client.parameters()

    def server_parameters(self):
        return self.server.parameters()

    def parameters(self):
        return self.client_parameters() + self.server_parameters()

    @property
    def quantum(self) -> Optional[qlayer.QuantumLayer]:
        return self.server_front if isinstance(self.server_front, qlayer.QuantumLayer) else None

    def client_forward(self, x, training=False):
        return self.client.forward(np.asarray(x, dtype=np.float64), training)

    def server_forward(self, z, training=False):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.cut_dim:
            raise ValueError(f"smashed data must be (N, {self.cut_dim}), got {z.shape}")
        return self.server.forward(z, training)

    def predict_labels(self, out):
        if self.config.variant == 1:
            return (out[:, 0] >= 0.5).astype(np.int64)
        return out.argmax(axis=1)

    def loss_kind(self):
        return "BCE" if self.config.variant == 1 else "CrossEntropy"


def _front(config: VariantConfig, rng):
    if config.server_front == "quantum":
        spec = qlayer.build_catalog_circuit(config.circuit_id)
        front = qlayer.QuantumLayer(spec, seed=config.seed, eval_mode=config.eval_mode, shots=config.shots, name="front")
        return front, spec.num_inputs, spec.num_qubits
    front = Sequential([Dense(CUT_DIM, FRONT_DIM, rng, name="front"), ReLU()], name="front")
    return front, CUT_DIM, FRONT_DIM


def build_variant1(config: Optional[VariantConfig] = None) -> SplitModel:
    config = config or VariantConfig(variant=1)
    rng = np.random.default_rng(config.seed)
    front, cut, out = _front(config, rng)
    widths = (config.input_dim,) + V1_CLIENT_WIDTHS + (cut,)
    client = []
    for i in range(len(widths) - 1):
        client += [Dense(widths[i], widths[i + 1], rng, name=f"client.{i}"), ReLU()]
    # linear cut: a ReLU here can silence a 2-3 unit cut for every input
    client.pop()
    w = (out,) + V1_SERVER_WIDTHS
    rest = [
        Dense(w[0], w[1], rng, name="server.0"), ReLU(), Dropout(V1_DROPOUT, np.random.default_rng(config.seed + 100)),
        Dense(w[1], w[2], rng, name="server.1"), ReLU(), Dropout(V1_DROPOUT, np.random.default_rng(config.seed + 101)),
        Dense(w[2], w[3], rng, name="server.2"), ReLU(),
        Dense(w[3], 1, rng, name="server.3"), Sigmoid(),
    ]
    return SplitModel(Sequential(client, "client"), front, Sequential(rest, "server_rest"), config, cut)


def build_variant2(config: VariantConfig) -> SplitModel:
    rng = np.random.default_rng(config.seed)
    front, cut, out = _front(config, rng)
    c1, c2 = V2_CHANNELS
    client = Sequential(
        [
            _ImageGuard(),
            Conv2D(1, c1, 3, padding=1, rng=rng, name="client.conv0"), ReLU(), MaxPool2D(),
            Conv2D(c1, c2, 3, padding=1, rng=rng, name="client.conv1"), ReLU(), MaxPool2D(),
            Flatten(),
            Dense(c2 * 7 * 7, V2_HIDDEN, rng, name="client.0"), ReLU(),
            Dense(V2_HIDDEN, cut, rng, name="client.1"),
        ],
        "client",
    )
    w = (out,) + V2_SERVER_WIDTHS
    rest = Sequential(
        [
            Dense(w[0], w[1], rng, name="server.0"), ReLU(),
            Dense(w[1], w[2], rng, name="server.1"), ReLU(),
            Dense(w[2], config.num_classes, rng, name="server.2"),
        ],
        "server_rest",
    )
    return SplitModel(client, front, rest, config, cut)


class _ImageGuard(Layer):
    """Rejects anything that is not a batch of 1x28x28 images."""

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1:] != (1, 28, 28):
            raise ValueError(f"variant 2 expects (N, 1, 28, 28) images, got {x.shape}")
        return x

    def backward(self, grad):
        return grad


def build_model(config: VariantConfig) -> SplitModel:
    return build_variant1(config) if config.variant == 1 else build_variant2(config)


def centralized_forward(model: SplitModel, x, training=False):
    """Every layer in order as one network."""
    h = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        h = layer.forward(h, training)
    return h


def split_forward(model: SplitModel, x):
    """Client half, then the server half on the smashed data; returns (z, prediction)."""
    z = model.client_forward(x)
    return z, model.server_forward(z)
