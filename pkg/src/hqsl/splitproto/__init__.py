from .wire import ControlOp, MsgType, ProtocolError, WireMessage, decode_message
from .transport import InProcessTransport, Recorder, TcpTransport, serve, serve_in_thread
from .roles import ClientRole, ServerRole
from .training import (
    TrainPlan,
    evaluate,
    infer,
    shard_iid,
    train_multi,
    train_single,
    write_metrics,
)
