"""Command-line interface, exercised through main() with tiny runs."""
from __future__ import annotations

import json

import numpy as np
import pytest

from geocontrast.cli import main
from geocontrast.evalsuite import load_report
from geocontrast.model import load_checkpoint

GEN_FLAGS = [
    "--n-cities", "3", "--streets-per-city", "3", "--samples-per-street", "3",
    "--feature-dim", "12", "--signal-dim", "6", "--seed", "5",
]

TRAIN_CFG = """
epochs = 2
batch_size = 8
hidden_dim = 8
embed_dim = 8
vocab_size = 256
n_freqs = 2
train_frac = 0.8
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One dataset + checkpoint + report shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "world.jsonl")
    cfg = root / "train.cfg"
    cfg.write_text(TRAIN_CFG)
    ckpt = str(root / "model.json")
    report = str(root / "report.json")
    assert main(["gen-data", "--out", data] + GEN_FLAGS) == 0
    assert main([
        "train", "--data", data, "--config", str(cfg), "--out", ckpt,
        "--log", str(root / "log.jsonl"),
    ]) == 0
    assert main([
        "eval", "--data", data, "--checkpoint", ckpt, "--report", report,
    ]) == 0
    return {"root": root, "data": data, "cfg": str(cfg), "ckpt": ckpt,
            "report": report}


def test_gen_data_output(tmp_path, capsys):
    out = str(tmp_path / "w.jsonl")
    assert main(["gen-data", "--out", out] + GEN_FLAGS) == 0
    printed = capsys.readouterr().out
    assert "wrote 27 samples" in printed
    assert "bounding box" in printed
    lines = [l for l in open(out) if l.strip()]
    assert len(lines) == 27


def test_gen_data_is_reproducible(tmp_path):
    a, b = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    assert main(["gen-data", "--out", a] + GEN_FLAGS) == 0
    assert main(["gen-data", "--out", b] + GEN_FLAGS) == 0
    assert open(a).read() == open(b).read()


def test_train_writes_checkpoint_with_metadata(workspace):
    params, meta = load_checkpoint(workspace["ckpt"])
    assert meta["mode"] == "sw"
    assert meta["dataset_size"] == 27
    assert meta["n_train"] == 21  # per-city round(0.8 * 9) = 7
    assert meta["train_config"]["epochs"] == 2
    assert params.d_img == 12


def test_train_writes_log(workspace):
    lines = (workspace["root"] / "log.jsonl").read_text().strip().split("\n")
    records = [json.loads(l) for l in lines]
    assert [r["step"] for r in records] == list(range(len(records)))
    assert {"l_total", "lr", "tau"} <= set(records[0])


def test_eval_writes_report(workspace, capsys):
    report = load_report(workspace["report"])
    assert report.n_queries == 6  # 27 - 21
    assert set(report.recall_at) == {1, 5}  # k=10 exceeds the 6-item gallery


def test_eval_split_all(workspace, tmp_path, capsys):
    out = str(tmp_path / "all.json")
    assert main([
        "eval", "--data", workspace["data"], "--checkpoint", workspace["ckpt"],
        "--split", "all", "--report", out,
    ]) == 0
    assert load_report(out).n_queries == 27
    assert "split=all" in capsys.readouterr().out


def test_eval_error_file(workspace, tmp_path):
    out = str(tmp_path / "r.json")
    errs = str(tmp_path / "errors.txt")
    assert main([
        "eval", "--data", workspace["data"], "--checkpoint", workspace["ckpt"],
        "--report", out, "--errors", errs,
    ]) == 0
    values = np.loadtxt(errs)
    assert values.shape == (6,)
    assert np.all(values >= 0)


def test_compare_table(workspace, tmp_path, capsys):
    second = str(tmp_path / "second.json")
    assert main([
        "eval", "--data", workspace["data"], "--checkpoint", workspace["ckpt"],
        "--split", "train", "--report", second,
    ]) == 0
    capsys.readouterr()
    assert main(["compare", "--reports", workspace["report"], second]) == 0
    out = capsys.readouterr().out
    assert "med_ge_m" in out and "city_align" in out
    assert "*" in out  # best-per-column marker
    assert workspace["report"] in out and second in out


def test_compare_needs_two_reports(workspace, capsys):
    assert main(["compare", "--reports", workspace["report"]]) == 2
    assert "at least 2" in capsys.readouterr().err


def test_inspect_weights(workspace, capsys):
    assert main([
        "inspect-weights", "--data", workspace["data"], "--index", "0",
        "--sigma", "300", "--d-cut", "2000",
    ]) == 0
    out = capsys.readouterr().out
    assert "street=" in out
    assert "weight" in out
    # The anchor itself is always its own nonzero entry.
    assert "0.00" in out


def test_inspect_weights_index_out_of_range(workspace, capsys):
    assert main([
        "inspect-weights", "--data", workspace["data"], "--index", "999",
    ]) == 1
    assert "out of range" in capsys.readouterr().err


def test_missing_dataset_is_reported(tmp_path, capsys):
    assert main([
        "train", "--data", str(tmp_path / "nope.jsonl"),
        "--out", str(tmp_path / "x.json"),
    ]) == 1
    assert "error:" in capsys.readouterr().err


def test_malformed_dataset_is_reported(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"}\n')
    assert main([
        "train", "--data", str(bad), "--out", str(tmp_path / "x.json"),
    ]) == 1
    err = capsys.readouterr().err
    assert ":1:" in err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["train"])  # missing required flags
    assert exc.value.code == 2


def test_unknown_config_key_is_reported(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epocs = 3\n")
    assert main([
        "gen-data", "--config", str(cfg), "--out", str(tmp_path / "w.jsonl"),
    ]) == 1
    assert "epocs" in capsys.readouterr().err