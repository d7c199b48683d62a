import json

import numpy as np
import pytest

from freqshield.cli import main
from freqshield.image_core import load_png, save_png

from conftest import random_image

BITS = "10110010" * 4


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip()
    return code, (json.loads(out) if out and not out.startswith(" ") else out)


@pytest.fixture
def carrier(tmp_path):
    path = tmp_path / "c.png"
    save_png(random_image(0, 64, 64), path)
    return path


def test_embed_lsb_and_decode(tmp_path, carrier, capsys):
    out = tmp_path / "w.png"
    code, doc = run(capsys, "embed", "--algo", "lsb", "--payload", BITS, "--in", carrier, "--out", out,
                    "--workdir", tmp_path)
    assert code == 0 and out.exists() and doc["max_amp"] == 1
    code, doc = run(capsys, "decode", "--algo", "lsb", "--in", out, "--workdir", tmp_path)
    assert code == 0 and doc["payload"] == BITS
    meta = json.loads((tmp_path / "freqshield_embed_run.json").read_text())
    assert meta["argv"][0] == "embed" and "versions" in meta


def test_bad_payload_exit_2(tmp_path, carrier, capsys):
    code, _ = run(capsys, "embed", "--algo", "lsb", "--payload", "1" * 31, "--in", carrier,
                  "--out", tmp_path / "x.png", "--workdir", tmp_path)
    assert code == 2


def test_patchwork_small_exit_4(tmp_path, capsys):
    save_png(random_image(1, 16, 16), tmp_path / "s.png")
    code, _ = run(capsys, "embed", "--algo", "patchwork", "--in", tmp_path / "s.png",
                  "--out", tmp_path / "o.png", "--workdir", tmp_path)
    assert code == 4


def test_missing_input_exit_3(tmp_path, capsys):
    code, _ = run(capsys, "embed", "--algo", "dct", "--in", tmp_path / "none.png",
                  "--out", tmp_path / "o.png", "--workdir", tmp_path)
    assert code == 3


def test_residual(tmp_path, carrier, capsys):
    code, doc = run(capsys, "residual", "--a", carrier, "--b", carrier, "--out-prefix", tmp_path / "r",
                    "--workdir", tmp_path)
    assert code == 0 and doc["density"] == 0
    assert (tmp_path / "r_residual.pgm").exists()
    save_png(random_image(2, 32, 32), tmp_path / "small.png")
    code, _ = run(capsys, "residual", "--a", carrier, "--b", tmp_path / "small.png",
                  "--out-prefix", tmp_path / "r2", "--workdir", tmp_path)
    assert code == 2


def test_pipeline_gen_split_train_eval_inspect(tmp_path, capsys):
    w = ["--workdir", tmp_path, "--seed", "3"]
    code, doc = run(capsys, "gen", "--counts", "dct=8,dwt=8", "--size", "32", "--out", "data", *w)
    assert code == 0
    code, doc = run(capsys, "split", "--manifest", "data", "--hold-out", "dwt", "--out", "split.json", *w)
    assert code == 0 and doc["violations"] == []
    code, _ = run(capsys, "split", "--manifest", "data", "--hold-out", "lsb", "--out", "bad.json", *w)
    assert code == 2
    code, doc = run(capsys, "train", "--manifest", "data", "--split", "split.json", "--out", "run",
                    "--epochs", "1", "--batch-size", "8", "--input-size", "32", *w)
    assert code == 0 and (tmp_path / "run" / "model.fsn").exists()
    code, doc = run(capsys, "eval", "--manifest", "data", "--model", "run/model.fsn", "--split", "split.json",
                    "--out", "ev", *w)
    assert code == 0
    assert doc == json.loads((tmp_path / "ev" / "report.json").read_text())
    code, doc = run(capsys, "inspect", "--model", "run/model.fsn", "--out-prefix", "insp/m",
                    "--manifest", "data", "--split", "split.json", "--n", "4", *w)
    assert code == 0 and (tmp_path / "insp" / "m_gate.pgm").exists()
    assert (tmp_path / "insp" / "m_attention.csv").exists()
    # replay the eval command and get the same report
    code, again = run(capsys, "replay", tmp_path / "freqshield_eval_run.json")
    assert code == 0 and again == doc_eval(tmp_path)


def doc_eval(tmp_path):
    return json.loads((tmp_path / "ev" / "report.json").read_text())


def test_gradcheck_subset(tmp_path, capsys):
    code, doc = run(capsys, "gradcheck", "--only", "relu,matmul", "--workdir", tmp_path)
    assert code == 0 and doc["passed"]
    code, _ = run(capsys, "gradcheck", "--only", "nonsense", "--workdir", tmp_path)
    assert code == 2


def test_gradcheck_full_exit_0(tmp_path, capsys):
    code, doc = run(capsys, "gradcheck", "--workdir", tmp_path)
    assert code == 0 and not doc["failed"]


def test_seed_from_environment(tmp_path, carrier, capsys, monkeypatch):
    monkeypatch.setenv("FREQSHIELD_SEED", "77")
    run(capsys, "embed", "--algo", "dct", "--in", carrier, "--out", tmp_path / "a.png", "--workdir", tmp_path)
    run(capsys, "embed", "--algo", "dct", "--in", carrier, "--out", tmp_path / "b.png", "--workdir", tmp_path,
        "--seed", "77")
    assert load_png(tmp_path / "a.png") == load_png(tmp_path / "b.png")
    meta = json.loads((tmp_path / "freqshield_embed_run.json").read_text())
    assert meta["seed"] == 77


def test_bad_config_section(tmp_path, carrier, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"optimizer": {}}))
    code, _ = run(capsys, "embed", "--algo", "dct", "--in", carrier, "--out", tmp_path / "a.png",
                  "--workdir", tmp_path, "--config", "cfg.json")
    assert code == 2


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
