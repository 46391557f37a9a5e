"""Command line: train, eval, sweep-circuits, attack, serve, client.

Exit codes: 0 success, 1 usage/config error, 2 runtime or protocol error.
Set HQSL_LOG_LEVEL (DEBUG, INFO, WARNING, ...) for log verbosity.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from . import experiments as ex
from .attack import write_report
from .models import build_model
from .neural import save_parameters
from .splitproto import ProtocolError, ServerRole, shard_iid, write_metrics
from .splitproto.training import make_transport, run_clients
from .splitproto.transport import bind, serve

log = logging.getLogger("hqsl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)


def _atomic_save(path, params):
    tmp = Path(str(path) + ".tmp")
    save_parameters(tmp, params)
    os.replace(tmp, path)


def cmd_train(args, cfg):
    ds = ex.load_dataset(cfg)
    if cfg["transport"] != "inprocess":
        raise UsageError("train runs in-process; use 'serve' and 'client' for tcp")
    model, rows, _, _ = ex.run_training(cfg, ds)
    write_metrics(args.metrics, rows)
    _atomic_save(args.checkpoint, model.parameters())
    last = rows[-1]
    print(f"trained: epoch {last['epoch']} accuracy {last['accuracy']:.4f} f1 {last['f1']:.4f}")


def cmd_eval(args, cfg):
    ds = ex.load_dataset(cfg)
    _, test = ex.split(cfg, ds)
    model = ex.rebuild(cfg, ds, args.checkpoint)
    res = ex.run_eval(cfg, model, test)
    d = cfg["defense"]
    row = {
        "accuracy": res["accuracy"], "f1": res["f1"], "loss": res["loss"],
        "p1": cfg["noise"]["p1"], "p2": cfg["noise"]["p2"],
        "mu_over_pi": d["mu_over_pi"] if d else "none", "b": d["b"] if d else "none",
    }
    if args.out:
        _write_rows(args.out, [row], list(row))
    print(json.dumps(row))


def cmd_sweep(args, cfg):
    rows = ex.sweep_circuits(cfg)
    _write_rows(args.out, rows, ex.SWEEP_COLUMNS)
    for r in rows:
        print(f"{r['circuit']!s:>9}  params {r['params']:>2}  depth {r['depth']:>2}  accuracy {r['accuracy']:.4f}")


def cmd_attack(args, cfg):
    if cfg["variant"] != 2:
        raise UsageError("attack needs an image model (variant 2)")
    ds = ex.load_dataset(cfg)
    _, test = ex.split(cfg, ds)
    model = ex.rebuild(cfg, ds, args.checkpoint)
    rows = ex.run_attack_sweep(cfg, model, test)
    write_report(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")


def cmd_serve(args, cfg):
    ds = ex.load_dataset(cfg)
    model = build_model(ex.variant_config(cfg, ds))
    server = ServerRole(model, cfg["optimizer"], cfg["lr"])
    listener = bind(args.host, args.port)
    print(f"listening on {args.host}:{listener.getsockname()[1]}", flush=True)
    serve(listener, server.handle, max_connections=None)
    if args.checkpoint:
        _atomic_save(args.checkpoint, model.server_parameters())


def cmd_client(args, cfg):
    ds = ex.load_dataset(cfg)
    train, test = ex.split(cfg, ds)
    cfg = dict(cfg, transport=f"tcp://{args.connect}")
    vc = ex.variant_config(cfg, ds)
    plan = ex.train_plan(cfg, vc)
    model = build_model(vc)
    shards = shard_iid(train, plan.num_clients, cfg["seed"])
    transport = make_transport(plan, None)
    try:
        rows = run_clients(model, plan, shards, transport, test, handoff=plan.num_clients > 1)
    finally:
        transport.close()
    write_metrics(args.metrics, rows)
    _atomic_save(args.checkpoint, model.client_parameters())
    print(f"client done: accuracy {rows[-1]['accuracy']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="hqsl",
        description="Hybrid quantum split learning experiments.",
        epilog=cfgmod.describe(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, epilog=cfgmod.describe(), formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="JSON run config (omitted keys take their defaults)")
        sp.set_defaults(func=fn)
        return sp

    sp = add("train", cmd_train, "train a model and write metrics + checkpoint")
    sp.add_argument("--metrics", required=True, help="metrics CSV output path")
    sp.add_argument("--checkpoint", required=True, help="checkpoint output path")

    sp = add("eval", cmd_eval, "evaluate a checkpoint on the held-out fold")
    sp.add_argument("--checkpoint", required=True, action="append", help="checkpoint(s); repeat for client/server halves")
    sp.add_argument("--out", help="optional CSV output path")

    sp = add("sweep-circuits", cmd_sweep, "train with every catalog circuit and the classical front")
    sp.add_argument("--out", required=True, help="comparison CSV output path")

    sp = add("attack", cmd_attack, "reconstruction attacks across the defense grid")
    sp.add_argument("--checkpoint", required=True, action="append", help="trained model checkpoint(s)")
    sp.add_argument("--out", required=True, help="report CSV output path")

    sp = add("serve", cmd_serve, "run the server half over tcp")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=5050)
    sp.add_argument("--checkpoint", help="server-half checkpoint written after Done")

    sp = add("client", cmd_client, "run the client side over tcp")
    sp.add_argument("--connect", required=True, help="server host:port")
    sp.add_argument("--metrics", required=True, help="metrics CSV output path")
    sp.add_argument("--checkpoint", required=True, help="client-half checkpoint output path")
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HQSL_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.resolve({})
        args.func(args, cfg)
    except (cfgmod.ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"hqsl: error: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, ConnectionError, OSError, ValueError, RuntimeError) as exc:
        print(f"hqsl: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
