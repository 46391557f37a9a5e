"""Single-client, round-robin multi-client, and defended-inference drivers."""
from __future__ import annotations

import copy
import csv
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .. import defense as dfn
from ..models import SplitModel, VariantConfig, build_model
from ..neural import loss
from ..scoring import accuracy, f1_score
from .roles import ClientRole, ServerRole, load_flat
from .transport import InProcessTransport, Recorder, TcpTransport
from .wire import ControlOp, MsgType, ProtocolError, WireMessage, decode_message

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "client", "loss", "accuracy", "f1")


@dataclass
class TrainPlan:
    num_clients: int = 1
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    variant: VariantConfig = field(default_factory=VariantConfig)
    defense: Optional[dfn.LaplaceNoiseConfig] = None
    transport: str = "inprocess"  # or "tcp://host:port"

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def label_tensor(model: SplitModel, labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    return y.reshape(-1, 1) if model.config.variant == 1 else y.reshape(-1)


def shard_iid(dataset, k: int, seed: int = 0):
    """Stratified IID split into ``k`` disjoint shards whose sizes differ by at most 1."""
    n = len(dataset.labels)
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} shards")
    if k == 1:
        return [dataset]
    rng = np.random.default_rng(seed)
    order = []
    for c in np.unique(dataset.labels):
        idx = np.flatnonzero(dataset.labels == c)
        order.append(rng.permutation(idx))
    # dealing class by class, continuing the round-robin across classes,
    # keeps both per-class and total shard sizes within 1
    dealt = np.concatenate(order)
    shards = [np.sort(dealt[i::k]) for i in range(k)]
    return [dataset.subset(s) for s in shards]


def make_transport(plan: TrainPlan, server: Optional[ServerRole], recorder: Optional[Recorder] = None):
    if plan.transport == "inprocess":
        if server is None:
            raise ValueError("in-process transport needs a server role")
        return InProcessTransport(server.handle, recorder)
    if plan.transport.startswith("tcp://"):
        host, port = plan.transport[6:].rsplit(":", 1)
        return TcpTransport(host, int(port), recorder)
    raise ValueError(f"unknown transport {plan.transport!r}")


def remote_predict(model: SplitModel, transport, x, defense: Optional[dfn.LaplaceNoiseConfig] = None, batch_index: int = 0):
    z = model.client_forward(x)
    if defense is not None:
        z = dfn.apply_noise(z, defense, batch_index)
    reply = transport.request(WireMessage.tensor(MsgType.SMASHED, z))
    if reply is None or reply.msg_type != MsgType.PREDICTION:
        raise ProtocolError("expected a prediction reply")
    return reply.as_tensor()


def score(model: SplitModel, out, labels):
    labels = np.asarray(labels)
    if model.config.variant == 1:
        value, _ = loss("BCE", out, labels.reshape(-1, 1).astype(np.float64))
    else:
        value, _ = loss("CrossEntropy", out, labels.astype(np.int64))
    pred = model.predict_labels(out)
    k = 2 if model.config.variant == 1 else model.config.num_classes
    return value, accuracy(labels, pred), f1_score(labels, pred, k)


def _client_epoch(client: ClientRole, transport, model, shard, plan, epoch):
    rng = np.random.default_rng([plan.seed, epoch, client.index])
    order = rng.permutation(len(shard.labels))
    y_all = label_tensor(model, shard.labels)
    transport.request(WireMessage.control(ControlOp.BEGIN_EPOCH))
    for start in range(0, len(order), plan.batch_size):
        idx = order[start : start + plan.batch_size]
        client.train_batch(transport, shard.features[idx], y_all[idx])
    transport.request(WireMessage.control(ControlOp.END_EPOCH))


def run_clients(
    model: SplitModel,
    plan: TrainPlan,
    shards: Sequence,
    transport,
    test=None,
    handoff: bool = True,
    recorder: Optional[Recorder] = None,
    finish: bool = True,
):
    """Round-robin training from the client side of ``transport``.

    ``model.client`` ends up holding the final client weights. Returns the
    metric rows, scored on ``test`` (or each client's own shard).
    """
    k_clients = len(shards)
    clients = [ClientRole(k, copy.deepcopy(model.client), plan.optimizer, plan.lr) for k in range(k_clients)]
    holder = 0
    rows = []
    for epoch in range(plan.epochs):
        for k, client in enumerate(clients):
            shard = shards[k]
            if len(shard.labels) == 0:
                log.warning("client %d has an empty shard; skipping its turn", k)
            else:
                _client_epoch(client, transport, model, shard, plan, epoch)
            holder = k
            if handoff:
                nxt = (k + 1) % k_clients
                msg = decode_message(client.handoff_message().encode())
                if recorder is not None:
                    recorder("peer", msg)
                clients[nxt].receive_handoff(msg)
                holder = nxt
            load_flat(model.client.parameters(), np.concatenate([p.value.reshape(-1) for p in client.network.parameters()]))
            eval_set = test if test is not None else shard
            if len(eval_set.labels):
                out = remote_predict(model, transport, eval_set.features)
                value, acc, f1 = score(model, out, eval_set.labels)
            else:
                value = acc = f1 = float("nan")
            rows.append({"epoch": epoch + 1, "client": k, "loss": value, "accuracy": acc, "f1": f1})
            log.info("epoch %d client %d loss %.4f acc %.4f", epoch + 1, k, value, acc)
    load_flat(model.client.parameters(), np.concatenate([p.value.reshape(-1) for p in clients[holder].network.parameters()]))
    if finish:
        transport.request(WireMessage.control(ControlOp.DONE))
    return rows


def train_multi(plan: TrainPlan, shards: Sequence, test=None, model: Optional[SplitModel] = None, recorder: Optional[Recorder] = None):
    """Algorithm-2 style training: clients 0..K-1 in turn, weights handed to the next."""
    if len(shards) != plan.num_clients:
        raise ValueError(f"plan has {plan.num_clients} clients but {len(shards)} shards were given")
    model = model if model is not None else build_model(plan.variant)
    server = ServerRole(model, plan.optimizer, plan.lr) if plan.transport == "inprocess" else None
    transport = make_transport(plan, server, recorder)
    try:
        rows = run_clients(model, plan, shards, transport, test, handoff=plan.num_clients > 1, recorder=recorder)
    finally:
        transport.close()
    return model, rows


def train_single(plan: TrainPlan, dataset, test=None, model: Optional[SplitModel] = None, recorder: Optional[Recorder] = None):
    if plan.num_clients != 1:
        raise ValueError("train_single needs num_clients == 1")
    return train_multi(plan, [dataset], test, model, recorder)


def infer(model: SplitModel, x, mode: str = "classification", defense=None, batch_index: int = 0, transport=None):
    """Defended inference. ``attack`` mode returns only the (perturbed) smashed data."""
    if isinstance(defense, dict):
        missing = {"mu", "b"} - defense.keys()
        if missing:
            raise ValueError(f"defense config missing {sorted(missing)}")
        defense = dfn.LaplaceNoiseConfig(defense["mu"], defense["b"], defense.get("seed", 0))
    z = model.client_forward(x)
    if defense is not None:
        z = dfn.apply_noise(z, defense, batch_index)
    if mode == "attack":
        return z
    if mode != "classification":
        raise ValueError(f"unknown inference mode {mode!r}")
    if transport is not None:
        reply = transport.request(WireMessage.tensor(MsgType.SMASHED, z))
        return reply.as_tensor()
    return model.server_forward(z)


def evaluate(model: SplitModel, dataset, defense=None, batch_size: int = 256):
    """(loss, accuracy, f1) with optional defended inference in fixed-size batches."""
    outs = []
    for b, start in enumerate(range(0, len(dataset.labels), batch_size)):
        outs.append(infer(model, dataset.features[start : start + batch_size], defense=defense, batch_index=b))
    return score(model, np.concatenate(outs), dataset.labels)


def write_metrics(path, rows: List[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(r)
