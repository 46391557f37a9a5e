import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hqsl import cli
from hqsl import config as cfgmod
from hqsl.neural.checkpoint import decode_tensors


def tensors(path):
    return decode_tensors(path.read_bytes())

SMALL = {"dataset": {"synthetic": "blobs", "n": 200}, "epochs": 2, "seed": 4}


def write_cfg(tmp_path, name="cfg.json", **over):
    p = tmp_path / name
    p.write_text(json.dumps({**SMALL, **over}))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- parsing and config ----------------------------------------------------


def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key in cfgmod.DEFAULTS:
        assert key in out
    for cmd in ("train", "eval", "sweep-circuits", "attack", "serve", "client"):
        assert cmd in out


def test_unknown_key_exits_1(tmp_path, capsys):
    code = cli.main(["train", "--config", write_cfg(tmp_path, epoch=3), "--metrics", "m", "--checkpoint", "c"])
    assert code == 1
    assert "epoch" in capsys.readouterr().err


def test_unknown_nested_key_exits_1(tmp_path):
    cfg = write_cfg(tmp_path, noise={"p3": 0.1})
    assert cli.main(["train", "--config", cfg, "--metrics", "m", "--checkpoint", "c"]) == 1


def test_bad_flags_exit_1():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1


def test_missing_dataset_no_checkpoint(tmp_path):
    cfg = write_cfg(tmp_path, dataset=str(tmp_path / "absent.csv"))
    ck = tmp_path / "m.ckpt"
    assert cli.main(["train", "--config", cfg, "--metrics", str(tmp_path / "m.csv"), "--checkpoint", str(ck)]) != 0
    assert not ck.exists()


def test_attack_needs_variant2(tmp_path):
    assert cli.main(["attack", "--config", write_cfg(tmp_path), "--checkpoint", "x", "--out", "y"]) == 1


# --- train / eval ----------------------------------------------------------


def train(tmp_path, tag="a", **over):
    cfg = write_cfg(tmp_path, f"{tag}.json", **over)
    m, c = tmp_path / f"{tag}.csv", tmp_path / f"{tag}.ckpt"
    assert cli.main(["train", "--config", cfg, "--metrics", str(m), "--checkpoint", str(c)]) == 0
    return cfg, read_csv(m), c


def test_train_rows_and_checkpoint(tmp_path):
    _, rows, ck = train(tmp_path)
    assert [int(r["epoch"]) for r in rows] == [1, 2]
    assert set(rows[0]) == {"epoch", "client", "loss", "accuracy", "f1"}
    names = set(tensors(ck))
    assert any(n.startswith("client.") for n in names) and any("front" in n for n in names)


def test_train_multi_client_rows(tmp_path):
    _, rows, _ = train(tmp_path, clients=4)
    assert len(rows) == 4 * 2
    assert [int(r["client"]) for r in rows[:4]] == [0, 1, 2, 3]


def test_train_deterministic(tmp_path):
    _, r1, c1 = train(tmp_path, "a")
    _, r2, c2 = train(tmp_path, "b")
    assert r1 == r2
    assert c1.read_bytes() == c2.read_bytes()


def test_eval_round_trip(tmp_path, capsys):
    cfg, rows, ck = train(tmp_path)
    out = tmp_path / "eval.csv"
    assert cli.main(["eval", "--config", cfg, "--checkpoint", str(ck), "--out", str(out)]) == 0
    row = read_csv(out)[0]
    assert float(row["accuracy"]) == pytest.approx(float(rows[-1]["accuracy"]))
    assert row["mu_over_pi"] == "none"


def test_eval_with_defense(tmp_path):
    cfg, _, ck = train(tmp_path)
    dcfg = write_cfg(tmp_path, "d.json", defense={"mu_over_pi": 4, "b": 0.01})
    out = tmp_path / "eval.csv"
    assert cli.main(["eval", "--config", dcfg, "--checkpoint", str(ck), "--out", str(out)]) == 0
    assert read_csv(out)[0]["mu_over_pi"] == "4"


def test_eval_rejects_corrupt_checkpoint(tmp_path):
    cfg = write_cfg(tmp_path)
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT")
    assert cli.main(["eval", "--config", cfg, "--checkpoint", str(bad)]) == 2


def test_sweep_circuits_rows(tmp_path):
    cfg = write_cfg(tmp_path, epochs=1, dataset={"synthetic": "blobs", "n": 100})
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep-circuits", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 11
    by_id = {r["circuit"]: r for r in rows}
    assert (by_id["6"]["params"], by_id["6"]["depth"]) == ("6", "8")
    assert by_id["classical"]["params"] == "8"


# --- tcp -------------------------------------------------------------------


def test_serve_client_matches_inprocess(tmp_path):
    cfg, rows_local, ck_local = train(tmp_path, "local", clients=2)
    srv = subprocess.Popen(
        [sys.executable, "-m", "hqsl", "serve", "--config", cfg, "--port", "0",
         "--checkpoint", str(tmp_path / "server.ckpt")],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        line = srv.stdout.readline()
        port = int(line.rsplit(":", 1)[1])
        m, c = tmp_path / "remote.csv", tmp_path / "client.ckpt"
        assert cli.main(["client", "--config", cfg, "--connect", f"127.0.0.1:{port}",
                         "--metrics", str(m), "--checkpoint", str(c)]) == 0
        assert srv.wait(timeout=60) == 0
    finally:
        srv.kill()
    assert read_csv(m) == rows_local
    local = tensors(ck_local)
    remote = tensors(c) | tensors(tmp_path / "server.ckpt")
    assert local.keys() == remote.keys()
    for k in local:
        np.testing.assert_array_equal(local[k], remote[k])


def test_client_connection_refused(tmp_path):
    cfg = write_cfg(tmp_path)
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    code = cli.main(["client", "--config", cfg, "--connect", f"127.0.0.1:{port}",
                     "--metrics", str(tmp_path / "m.csv"), "--checkpoint", str(tmp_path / "c.ckpt")])
    assert code == 2
