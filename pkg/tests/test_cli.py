import json
import subprocess
import sys

import pytest

from memflow import __version__
from memflow.cli import main, masked_weights, parse_sweep

TINY = ["--hidden", "8", "--encoder-heads", "2", "--memory-size", "4", "--encoder-layers", "1",
        "--stage1-epochs", "2", "--stage2-epochs", "1", "--peak-lr", "0.005", "--no-fail-fast"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--n-train", "8", "--n-test", "4", "--seed", "2"]) == 0
    assert main(["train", "--corpus", str(root / "data" / "train.json"), "--out", str(root / "run"), *TINY]) == 0
    return root


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_synth_outputs(workspace):
    data = workspace / "data"
    triggers = json.loads((data / "triggers.json").read_text(encoding="utf-8"))
    assert len(triggers["train"]) == 8 and len(triggers["test"]) == 4
    assert len(json.loads((data / "test.json").read_text(encoding="utf-8"))["sentences"]) == 4


def test_train_outputs(workspace):
    run_dir = workspace / "run"
    lines = (run_dir / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["stage"] for line in lines] == [1, 1, 2]
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["version"] == __version__
    assert manifest["config"]["hidden"] == 8 and manifest["seeds"]["master"] == 0
    assert len(manifest["corpus"]["train"]["sha256"]) == 64
    assert manifest["degraded"] is False
    assert "relation" in manifest["final_metrics"]["train"]


def test_same_seed_reruns_give_identical_metrics(workspace, tmp_path):
    corpus = str(workspace / "data" / "train.json")
    assert main(["train", "--corpus", corpus, "--out", str(tmp_path / "again"), *TINY]) == 0
    assert (tmp_path / "again" / "metrics.jsonl").read_bytes() == (workspace / "run" / "metrics.jsonl").read_bytes()
    assert (tmp_path / "again" / "checkpoint.json").read_bytes() == \
        (workspace / "run" / "checkpoint.json").read_bytes()


def test_preset_config_file_and_flag_precedence(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden": 16, "seed": 4}), encoding="utf-8")
    out = tmp_path / "r"
    code = main(["train", "--corpus", str(workspace / "data" / "train.json"), "--out", str(out),
                 "--preset", "desk", "--config", str(cfg), *TINY, "--stage1-epochs", "0", "--no-subword-mfa"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["hidden"] == 8          # flag beats file
    assert manifest["config"]["seed"] == 4            # file beats preset
    assert manifest["config"]["batch_size"] == 1      # preset beats defaults
    assert manifest["config"]["subword_mfa"] is False
    assert manifest["degraded"] is True


def test_eval_threshold_sweep(workspace, capsys, tmp_path):
    code, out = run(capsys, "eval", "--checkpoint", str(workspace / "run" / "checkpoint.json"),
                    "--corpus", str(workspace / "data" / "test.json"), "--threshold-sweep", "0:1:0.1",
                    "--out", str(tmp_path / "sweep.json"))
    assert code == 0
    rows = json.loads((tmp_path / "sweep.json").read_text(encoding="utf-8"))["sweep"]
    assert [r["threshold"] for r in rows] == [round(0.1 * k, 10) for k in range(11)]
    assert len(out.out.strip().splitlines()) == 11


def test_eval_both_regimes(workspace, capsys, tmp_path):
    code, out = run(capsys, "eval", "--checkpoint", str(workspace / "run" / "checkpoint.json"),
                    "--corpus", str(workspace / "data" / "test.json"), "--regime", "both",
                    "--averaging", "macro", "--out", str(tmp_path / "r.json"))
    assert code == 0
    report = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    assert [r["regime"] for r in report["reports"]] == ["strict", "boundary"]
    assert report["threshold"] == 0.5
    assert "regime=boundary averaging=macro" in out.out


def test_predict_and_triggers(workspace, capsys):
    ck, data = str(workspace / "run" / "checkpoint.json"), str(workspace / "data" / "test.json")
    code, out = run(capsys, "predict", "--checkpoint", ck, "--input", data, "--threshold", "0")
    assert code == 0
    preds = json.loads(out.out)
    assert len(preds) == 4 and set(preds[0]) == {"tokens", "entities", "relations"}
    code, out = run(capsys, "triggers", "--checkpoint", ck, "--input", data, "--threshold", "0", "--k", "2")
    assert code == 0
    for sent in json.loads(out.out):
        for rel in sent["relations"]:
            assert len(rel["triggers"]) <= 2
            assert set(rel) == {"head", "tail", "relation", "probability", "triggers"}


def test_dump_attention(workspace, capsys, tmp_path):
    code, _ = run(capsys, "dump-attention", "--checkpoint", str(workspace / "run" / "checkpoint.json"),
                  "--input", str(workspace / "data" / "test.json"), "--out", str(tmp_path / "att.json"))
    assert code == 0
    dump = json.loads((tmp_path / "att.json").read_text(encoding="utf-8"))
    for sent in dump:
        assert sent["entities"]["source"] == "gold"
        assert len(sent["attention"]["word"]["entity"]["raw"]) == len(sent["tokens"])
        assert len(sent["attention"]["subword"]["relation"]["raw"]) == len(sent["pieces"])
        for level in sent["attention"].values():
            for kind in level.values():
                assert kind["masked"] is None or abs(sum(kind["masked"]) - 1) < 1e-9


def test_masked_weights_and_sweep_parsing():
    assert masked_weights([1.0, 1.0, 2.0], [0]) == pytest.approx([0.0, 1 / 3, 2 / 3])
    assert masked_weights([1.0, 2.0], [0, 1]) is None
    assert parse_sweep("0.3:0.7:0.1") == [0.3, 0.4, 0.5, 0.6, 0.7]


@pytest.mark.parametrize("argv,code", [
    (["train", "--corpus", "x.json"], 2),
    (["eval", "--checkpoint", "c", "--corpus", "d", "--threshold-sweep", "1:0:0.1"], 2),
])
def test_usage_errors_exit_2(argv, code):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == code


def test_error_exit_codes(workspace, tmp_path, capsys):
    corpus = str(workspace / "data" / "train.json")
    ck = str(workspace / "run" / "checkpoint.json")
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"hiden": 3}), encoding="utf-8")
    assert run(capsys, "train", "--corpus", corpus, "--out", str(tmp_path / "o"), "--config", str(bad_cfg))[0] == 3
    assert run(capsys, "train", "--corpus", corpus, "--out", str(tmp_path / "o"), "--hidden", "10")[0] == 3
    assert run(capsys, "train", "--corpus", str(tmp_path / "none.json"), "--out", str(tmp_path / "o"))[0] == 4
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps([{"tokens": ["a"], "entities": [{"type": "X", "begin": 0, "end": 3}]}]),
                      encoding="utf-8")
    code, out = run(capsys, "predict", "--checkpoint", ck, "--input", str(broken))
    assert code == 4 and "outside 1 tokens" in out.err
    assert run(capsys, "eval", "--checkpoint", str(tmp_path / "nope.json"), "--corpus", corpus)[0] == 5
    foreign = tmp_path / "foreign.json"
    foreign.write_text(json.dumps([{"tokens": ["a", "b"], "entities": [{"type": "ALIEN", "begin": 0, "end": 1}]}]),
                       encoding="utf-8")
    assert run(capsys, "predict", "--checkpoint", ck, "--input", str(foreign))[0] == 5


def test_diverged_run_exits_6(workspace, tmp_path, capsys):
    # a zero learning rate with no sampling and no dropout keeps the loss flat
    code, out = run(capsys, "train", "--corpus", str(workspace / "data" / "train.json"),
                    "--out", str(tmp_path / "flat"), *TINY, "--stage1-epochs", "5", "--peak-lr", "0",
                    "--fail-fast", "--dropout", "0", "--neg-entity-count", "0", "--neg-relation-count", "0",
                    "--batch-size", "8")
    assert code == 6 and "did not fall" in out.err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "memflow", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
