"""Request/response transports. Both serialize every message through the wire format."""
from __future__ import annotations

import logging
import socket
import threading
from typing import Callable, List, Optional

from .wire import HEADER, ControlOp, MsgType, WireMessage, decode_message, parse_header

log = logging.getLogger(__name__)

Handler = Callable[[WireMessage], Optional[WireMessage]]


class Recorder:
    """Keeps (direction, message) pairs; direction is ``"up"`` (to server) or ``"down"``."""

    def __init__(self):
        self.events: List[tuple] = []

    def __call__(self, direction: str, msg: WireMessage):
        self.events.append((direction, msg))

    def types(self, direction: Optional[str] = None):
        return [m.msg_type for d, m in self.events if direction is None or d == direction]


class Transport:
    recorder: Optional[Recorder] = None

    def request(self, msg: WireMessage) -> Optional[WireMessage]:
        raise NotImplementedError

    def close(self):
        pass

    def _record(self, direction, msg):
        if self.recorder is not None and msg is not None:
            self.recorder(direction, msg)


class InProcessTransport(Transport):
    """Calls the server handler directly, still round-tripping bytes."""

    def __init__(self, handler: Handler, recorder: Optional[Recorder] = None):
        self.handler = handler
        self.recorder = recorder

    def request(self, msg):
        self._record("up", msg)
        reply = self.handler(decode_message(msg.encode()))
        if reply is None:
            return None
        reply = decode_message(reply.encode())
        self._record("down", reply)
        return reply


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-message")
        buf += chunk
    return bytes(buf)


def read_message(sock: socket.socket) -> WireMessage:
    head = _recv_exact(sock, HEADER.size)
    _, length = parse_header(head)
    return decode_message(head + _recv_exact(sock, length))


def expects_reply(msg: WireMessage, in_epoch: bool) -> bool:
    if msg.msg_type == MsgType.LABEL:
        return True
    return msg.msg_type == MsgType.SMASHED and not in_epoch


class TcpTransport(Transport):
    """Client end of a TCP connection to :func:`serve`."""

    def __init__(self, host: str, port: int, recorder: Optional[Recorder] = None, timeout: float = 60.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.recorder = recorder
        self._in_epoch = False

    def request(self, msg):
        self._record("up", msg)
        self.sock.sendall(msg.encode())
        if msg.msg_type == MsgType.CONTROL:
            op = msg.as_control()
            self._in_epoch = op == ControlOp.BEGIN_EPOCH
            return None
        if not expects_reply(msg, self._in_epoch):
            return None
        reply = read_message(self.sock)
        self._record("down", reply)
        return reply

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def bind(host: str = "127.0.0.1", port: int = 0) -> socket.socket:
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    return srv


def serve(listener: socket.socket, handler: Handler, max_connections: Optional[int] = 1):
    """Handle client connections one at a time until ``Done`` or ``max_connections``.

    Protocol errors are sent back as a dropped connection and re-raised.
    """
    served = 0
    try:
        while max_connections is None or served < max_connections:
            conn, addr = listener.accept()
            served += 1
            log.info("client connected from %s", addr)
            with conn:
                while True:
                    try:
                        msg = read_message(conn)
                    except ConnectionError:
                        log.info("client disconnected")
                        break
                    reply = handler(msg)
                    if reply is not None:
                        conn.sendall(reply.encode())
                    if msg.msg_type == MsgType.CONTROL and msg.as_control() == ControlOp.DONE:
                        return
    finally:
        listener.close()


def serve_in_thread(handler: Handler, host: str = "127.0.0.1"):
    """Start :func:`serve` on a background thread; returns ``(port, thread, errors)``."""
    listener = bind(host, 0)
    port = listener.getsockname()[1]
    errors: list = []

    def run():
        try:
            serve(listener, handler)
        except Exception as exc:  # surfaced to the caller through ``errors``
            errors.append(exc)

    t = threading.Thread(target=run, daemon=True)
    t.start()
    return port, t, errors
