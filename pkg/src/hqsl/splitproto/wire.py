"""Framed binary messages exchanged between split-learning clients and the server.

Frame: ``b"HQSL" | version u8 | type u8 | payload_len u32le | payload``.
Tensor payloads are ``rank u8 | dims u32le * rank | float64le data``;
control payloads are one opcode byte.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"HQSL"
VERSION = 1
HEADER = struct.Struct("<4sBBI")


class ProtocolError(Exception):
    pass


class MsgType(enum.IntEnum):
    SMASHED = 0
    LABEL = 1
    GRADIENT = 2
    WEIGHT_HANDOFF = 3
    CONTROL = 4
    PREDICTION = 5


class ControlOp(enum.IntEnum):
    BEGIN_EPOCH = 0
    END_EPOCH = 1
    DONE = 2


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim > 255:
        raise ValueError("rank too large")
    head = struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr).tobytes()


def decode_tensor(payload: bytes) -> np.ndarray:
    if len(payload) < 1:
        raise ProtocolError("empty tensor payload")
    rank = payload[0]
    end = 1 + 4 * rank
    if len(payload) < end:
        raise ProtocolError("truncated tensor shape")
    shape = struct.unpack_from(f"<{rank}I", payload, 1)
    size = int(np.prod(shape)) if rank else 1
    if len(payload) != end + 8 * size:
        raise ProtocolError(f"tensor payload size {len(payload)} does not match shape {shape}")
    return np.frombuffer(payload, dtype="<f8", offset=end).reshape(shape).astype(np.float64)


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    payload: bytes

    @classmethod
    def tensor(cls, msg_type: MsgType, arr) -> "WireMessage":
        if msg_type == MsgType.CONTROL:
            raise ValueError("control messages carry an opcode, not a tensor")
        return cls(MsgType(msg_type), encode_tensor(arr))

    @classmethod
    def control(cls, op: ControlOp) -> "WireMessage":
        return cls(MsgType.CONTROL, bytes([ControlOp(op)]))

    def as_tensor(self) -> np.ndarray:
        return decode_tensor(self.payload)

    def as_control(self) -> ControlOp:
        if self.msg_type != MsgType.CONTROL or len(self.payload) != 1:
            raise ProtocolError("not a control message")
        try:
            return ControlOp(self.payload[0])
        except ValueError:
            raise ProtocolError(f"unknown control opcode {self.payload[0]}") from None

    def encode(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, int(self.msg_type), len(self.payload)) + self.payload


def parse_header(head: bytes):
    if len(head) != HEADER.size:
        raise ProtocolError("truncated header")
    magic, version, mtype, length = HEADER.unpack(head)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise ProtocolError(f"unknown message type {mtype}") from None
    return mtype, length


def decode_message(frame: bytes) -> WireMessage:
    mtype, length = parse_header(frame[: HEADER.size])
    payload = frame[HEADER.size :]
    if len(payload) != length:
        raise ProtocolError(f"payload length {len(payload)} != declared {length}")
    return WireMessage(mtype, bytes(payload))
