"""
Split training with one and many clients
========================================

Train the tabular variant on blob data: the client stack computes smashed
data, the server (quantum front plus dense head) returns gradients. Then
repeat with several clients taking turns, and over a real tcp socket.
"""
import numpy as np

from hqsl import config as cfgmod
from hqsl import experiments as ex
from hqsl.splitproto import Recorder, ServerRole, serve_in_thread, shard_iid, train_multi
from hqsl.models import build_model

cfg = cfgmod.resolve({"dataset": {"synthetic": "blobs", "n": 1000, "separation": 1.5}, "epochs": 10})
ds = ex.load_dataset(cfg)

###############################################################################
# One client. Every message crosses the wire codec, even in-process.
rec = Recorder()
model, rows, train, test = ex.run_training(cfg, ds, recorder=rec)
for r in rows[::3]:
    print(f"epoch {r['epoch']:>2}  loss {r['loss']:.4f}  accuracy {r['accuracy']:.3f}")
print("client -> server:", sorted({t.name for t in rec.types("up")}))
print("server -> client:", sorted({t.name for t in rec.types("down")}))

###############################################################################
# Round-robin clients. Each local epoch ends with a weight hand-off to the
# next client, so the client stack keeps learning from every shard.
for k in (1, 2, 5, 10):
    _, rows, _, _ = ex.run_training(dict(cfg, clients=k), ds)
    print(f"K = {k:>2}: final accuracy {rows[-1]['accuracy']:.3f}")

###############################################################################
# Same run over tcp: a server thread, a socket per run, identical weights.
cfg3 = dict(cfg, clients=3)
vc = ex.variant_config(cfg3, ds)
local, _ = train_multi(ex.train_plan(cfg3, vc), shard_iid(train, 3, 0), test)
server_model = build_model(vc)
port, thread, _ = serve_in_thread(ServerRole(server_model).handle)
remote, _ = train_multi(ex.train_plan(dict(cfg3, transport=f"tcp://127.0.0.1:{port}"), vc),
                        shard_iid(train, 3, 0), test, model=build_model(vc))
thread.join()
same = all(np.array_equal(a.value, b.value) for a, b in zip(local.client_parameters(), remote.client_parameters()))
print("tcp client weights identical to in-process:", same)

###############################################################################
# Depolarizing noise at evaluation time, on the default (well separated) task.
base = cfgmod.resolve({})
model, _, _, test = ex.run_training(base)
for p in (0.0, 0.05, 0.09):
    res = ex.run_eval(dict(base, noise={"p1": p, "p2": p, "trajectories": 64}), model, test)
    print(f"p = {p:.2f}: accuracy {res['accuracy']:.3f}")
