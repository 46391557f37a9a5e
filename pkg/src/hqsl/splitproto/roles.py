"""Server and client roles of split training."""
from __future__ import annotations

import logging

import numpy as np

from ..neural import Sequential, loss, make_optimizer
from .wire import ControlOp, MsgType, ProtocolError, WireMessage

log = logging.getLogger(__name__)


def flatten_params(params) -> np.ndarray:
    return np.concatenate([p.value.reshape(-1) for p in params]) if params else np.zeros(0)


def load_flat(params, flat):
    flat = np.asarray(flat, dtype=np.float64).reshape(-1)
    total = sum(p.value.size for p in params)
    if flat.size != total:
        raise ProtocolError(f"weight vector has {flat.size} values, expected {total}")
    pos = 0
    for p in params:
        p.value[...] = flat[pos : pos + p.value.size].reshape(p.value.shape)
        pos += p.value.size


class ServerRole:
    """Protocol state machine holding the server half of the model.

    Inside ``BeginEpoch``/``EndEpoch`` a smashed batch followed by its labels
    triggers one training step and a gradient reply. Outside an epoch a
    smashed batch is answered with predictions.
    """

    def __init__(self, model, optimizer: str = "adam", lr: float = 1e-3):
        self.model = model
        self.optimizer = make_optimizer(optimizer, model.server_parameters(), lr=lr)
        self.loss_kind = model.loss_kind()
        self.in_epoch = False
        self.done = False
        self._pending = None
        self.batch_losses: list = []

    def handle(self, msg: WireMessage):
        t = msg.msg_type
        if t == MsgType.CONTROL:
            op = msg.as_control()
            if op == ControlOp.BEGIN_EPOCH:
                self.in_epoch = True
                self.batch_losses = []
            elif op == ControlOp.END_EPOCH:
                self.in_epoch = False
                self._pending = None
            else:
                self.done = True
            return None
        if t == MsgType.SMASHED:
            z = msg.as_tensor()
            if self.in_epoch:
                self._pending = z
                return None
            return WireMessage.tensor(MsgType.PREDICTION, self.model.server_forward(z, training=False))
        if t == MsgType.LABEL:
            if not self.in_epoch or self._pending is None:
                raise ProtocolError("labels received without a pending smashed batch")
            return WireMessage.tensor(MsgType.GRADIENT, self._train_step(self._pending, msg.as_tensor()))
        raise ProtocolError(f"server cannot handle {t.name}")

    __call__ = handle

    def _train_step(self, z, y):
        self._pending = None
        if y.shape[0] != z.shape[0]:
            raise ProtocolError("label and smashed batch sizes differ")
        out = self.model.server_forward(z, training=True)
        target = y.astype(np.int64) if self.loss_kind == "CrossEntropy" else y.reshape(out.shape)
        value, grad = loss(self.loss_kind, out, target)
        self.batch_losses.append(value)
        dz = self.model.server.backward(grad)
        self.optimizer.step()
        return dz


class ClientRole:
    def __init__(self, index: int, network: Sequential, optimizer: str = "adam", lr: float = 1e-3):
        self.index = index
        self.network = network
        self.optimizer = make_optimizer(optimizer, network.parameters(), lr=lr)

    def train_batch(self, transport, x, y):
        z = self.network.forward(x, training=True)
        transport.request(WireMessage.tensor(MsgType.SMASHED, z))
        reply = transport.request(WireMessage.tensor(MsgType.LABEL, y))
        if reply is None or reply.msg_type != MsgType.GRADIENT:
            raise ProtocolError("expected a gradient reply")
        dz = reply.as_tensor()
        if dz.shape != z.shape:
            raise ProtocolError(f"gradient shape {dz.shape} != smashed shape {z.shape}")
        self.network.backward(dz)
        self.optimizer.step()

    def handoff_message(self) -> WireMessage:
        return WireMessage.tensor(MsgType.WEIGHT_HANDOFF, flatten_params(self.network.parameters()))

    def receive_handoff(self, msg: WireMessage):
        if msg.msg_type != MsgType.WEIGHT_HANDOFF:
            raise ProtocolError("expected a weight hand-off")
        load_flat(self.network.parameters(), msg.as_tensor())
