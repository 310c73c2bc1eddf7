import json
import os
import subprocess
import sys

import numpy as np
import pytest

from voxgrad.autodiff import save_tensor
from voxgrad.cli import main
from voxgrad.models import load_checkpoint


@pytest.fixture(scope="session")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["gen-data", "--out", str(data), "--per-class", "4", "--test-per-class", "2",
                 "--resolution", "8", "--points", "32", "--seed", "3"]) == 0
    assert main(["train", "--manifest", str(data / "manifest.json"), "--epochs", "3", "--lr", "0.02",
                 "--out", str(root / "run" / "train")]) == 0
    return root


def manifest(run):
    return str(run / "data" / "manifest.json")


def ckpt(run):
    return str(run / "run" / "train" / "checkpoint.vgc")


def test_gen_data_outputs(run):
    m = json.loads((run / "data" / "manifest.json").read_text())
    assert m["splits"] == {"train": 20, "test": 10}
    assert len(m["samples"]) == 30 and m["run_config"]["seed"] == 3


def test_gen_data_same_seed_same_bytes(tmp_path):
    args = ["--per-class", "1", "--test-per-class", "0", "--resolution", "8", "--points", "8", "--seed", "5"]
    assert main(["gen-data", "--out", str(tmp_path / "a"), *args]) == 0
    assert main(["gen-data", "--out", str(tmp_path / "b"), *args]) == 0
    a = (tmp_path / "a" / "manifest.json").read_text().replace(str(tmp_path / "a"), "")
    b = (tmp_path / "b" / "manifest.json").read_text().replace(str(tmp_path / "b"), "")
    assert a == b


def test_gen_data_errors(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path / "x"), "--classes", "cube,blob"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen-data", "--out", str(blocker / "sub"), "--per-class", "1"]) == 2


def test_train_log_and_loss(run):
    log = json.loads((run / "run" / "train" / "train.json").read_text())
    assert log["final_loss"] < log["initial_loss"]
    assert len(log["epoch_losses"]) == 3
    assert log["run_config"]["command"] == "train" and log["run_config"]["epochs"] == 3


def test_train_zero_epochs_is_initialisation(run, tmp_path):
    from voxgrad.models import build_model

    assert main(["train", "--manifest", manifest(run), "--epochs", "0", "--seed", "7", "--out", str(tmp_path)]) == 0
    m = load_checkpoint(tmp_path / "checkpoint.vgc")
    ref = build_model("voxnet", 5, seed=7, resolution=8)
    for n in ref.params:
        assert m.params[n].data.tobytes() == ref.params[n].data.tobytes()


def test_train_input_errors(tmp_path):
    assert main(["train", "--manifest", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--manifest", str(bad), "--out", str(tmp_path)]) == 3


def test_config_file_and_flag_override(run, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 0, "seed": 11, "lr": 0.5}))
    assert main(["train", "--config", str(cfg), "--manifest", manifest(run), "--seed", "12",
                 "--out", str(tmp_path / "o")]) == 0
    rc = json.loads((tmp_path / "o" / "train.json").read_text())["run_config"]
    assert rc["epochs"] == 0 and rc["seed"] == 12 and rc["lr"] == 0.5
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["train", "--config", str(cfg), "--manifest", manifest(run), "--out", str(tmp_path)]) == 2


def test_attribute_intgrad_defaults(run, tmp_path):
    out = tmp_path / "ig"
    assert main(["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--limit", "2",
                 "--out", str(out)]) == 0
    docs = sorted(out.glob("*.intgrad.json"))
    assert len(docs) == 2
    d = json.loads(docs[0].read_text())
    assert d["info"]["steps"] == 50 and d["info"]["baseline"] == "empty"
    assert "completeness_gap" in d["info"]
    assert (out / d["ply"]).exists()
    assert set(d["structure"]) == {"corner", "edge", "face", "interior"}


def test_attribute_masked_zero_on_empty(run, tmp_path):
    from voxgrad.geometry import load_dataset

    out = tmp_path / "m"
    assert main(["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--method", "masked",
                 "--class", "2", "--out", str(out)]) == 0
    test = {s.id: s for s in load_dataset(manifest(run), "test")}
    for p in out.glob("*.masked.json"):
        d = json.loads(p.read_text())
        scores = np.array(d["scores"])
        assert d["target_class"] == 2
        assert (scores[test[d["sample"]].voxels.occupancy == 0] == 0).all()


def test_attribute_deterministic_bytes_with_threads(run, tmp_path, monkeypatch):
    args = ["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--method", "guided",
            "--limit", "3"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("VOXGRAD_THREADS", "3")
    assert main([*args, "--out", str(tmp_path / "a")]) == 0  # same out dir, so run_config is identical
    files = sorted((tmp_path / "a").iterdir())
    first = {p.name: p.read_bytes() for p in files}
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert {p.name: p.read_bytes() for p in sorted((tmp_path / "a").iterdir())} == first


def test_attribute_errors(run, tmp_path):
    base = ["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--out", str(tmp_path)]
    assert main([*base, "--method", "lrp"]) == 2
    assert main([*base, "--class", "9"]) == 2
    assert main([*base, "--baseline", "centroid"]) == 2
    assert main([*base, "--sample", "nope"]) == 3
    assert main(["attribute", "--checkpoint", str(tmp_path / "x.vgc"), "--manifest", manifest(run),
                 "--out", str(tmp_path)]) == 3


def test_attribute_baseline_file_and_off_input(run, tmp_path):
    save_tensor(tmp_path / "b.bin", np.zeros((8, 8, 8)))
    assert main(["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--limit", "1",
                 "--steps", "4", "--baseline", "file", "--baseline-file", str(tmp_path / "b.bin"),
                 "--out", str(tmp_path / "f")]) == 0
    d = json.loads(next((tmp_path / "f").glob("*.json")).read_text())
    assert d["info"]["baseline"] == "file" and d["info"]["steps"] == 4
    off = os.path.join(os.path.dirname(__file__), "fixtures")
    assert main(["attribute", "--checkpoint", ckpt(run), "--input", os.path.join(off, "cube.off"),
                 "--method", "vanilla", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "cube.vanilla.json").exists()
    assert main(["attribute", "--checkpoint", ckpt(run), "--input", os.path.join(off, "bad_index.off"),
                 "--out", str(tmp_path / "o")]) == 3


def test_pointnet_attribution_via_cli(run, tmp_path):
    assert main(["train", "--manifest", manifest(run), "--model", "pointnet", "--epochs", "1",
                 "--out", str(tmp_path / "pn")]) == 0
    assert main(["attribute", "--checkpoint", str(tmp_path / "pn" / "checkpoint.vgc"), "--manifest",
                 manifest(run), "--limit", "1", "--steps", "5", "--out", str(tmp_path / "pa")]) == 0
    d = json.loads(next((tmp_path / "pa").glob("*.json")).read_text())
    assert d["domain"] == "point" and d["info"]["baseline"] == "centroid"
    assert np.array(d["raw"]).shape == (32, 3) and len(d["scores"]) == 32
    assert main(["prune", "--checkpoint", str(tmp_path / "pn" / "checkpoint.vgc"), "--manifest",
                 manifest(run), "--out", str(tmp_path / "pp")]) == 2


def test_prune_outputs(run):
    out = run / "run" / "prune"
    assert main(["prune", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--c-lo", "1.0",
                 "--c-hi", "1.2", "--finetune-epochs", "1", "--out", str(out)]) == 0
    rep = json.loads((out / "prune_report.json").read_text())
    assert set(rep["accuracy"]) == {"before", "after_prune", "after_finetune"}
    assert all(v is not None for v in rep["accuracy"].values())
    assert rep["percent_remaining"] < 100
    assert len((out / "prune_report.txt").read_text().splitlines()) == 4
    pruned = load_checkpoint(out / "pruned.vgc")
    nz = sum(int(np.count_nonzero(p.data)) for p in pruned.params.values())
    assert nz <= rep["nonzero_params"]
    assert sorted(p.name for p in (out / "filters").iterdir()) == ["conv1.json", "conv2.json", "res_a.json",
                                                                     "res_b.json"]


def test_prune_sentinel_keeps_everything(run, tmp_path):
    assert main(["prune", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--c-lo=-inf", "--c-hi=-inf",
                 "--finetune-epochs", "0", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "prune_report.json").read_text())
    assert rep["percent_remaining"] == 100.0
    assert main(["prune", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--c-lo", "2",
                 "--c-hi", "1", "--out", str(tmp_path)]) == 2


def test_eval(run, tmp_path):
    assert main(["eval", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "eval.json").read_text())
    conf = np.array(rep["confusion_matrix"])
    assert conf.shape == (5, 5) and conf.sum(axis=1).tolist() == [2] * 5
    assert rep["class_names"][0] == "cube"


def test_eval_class_count_mismatch(run, tmp_path):
    assert main(["gen-data", "--out", str(tmp_path / "d"), "--classes", "cube,sphere", "--per-class", "1",
                 "--test-per-class", "1", "--resolution", "8", "--points", "8"]) == 0
    assert main(["eval", "--checkpoint", ckpt(run), "--manifest", str(tmp_path / "d" / "manifest.json"),
                 "--out", str(tmp_path)]) == 2


def test_report(run, tmp_path):
    rd = run / "run"
    assert main(["attribute", "--checkpoint", ckpt(run), "--manifest", manifest(run), "--only-class", "cube",
                 "--steps", "10", "--out", str(rd / "attr")]) == 0
    assert main(["report", str(rd), "--out", str(tmp_path / "a")]) == 0
    assert main(["report", str(rd), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "summary.json").read_text()
    b = (tmp_path / "b" / "summary.json").read_text()
    assert a.replace(str(tmp_path / "a"), "") == b.replace(str(tmp_path / "b"), "")
    s = json.loads(a)
    cube = [e for e in s["attribution"] if e["class_name"] == "cube" and e["method"] == "intgrad"][0]
    assert set(cube["mean_by_structure"]) == {"corner", "edge", "face", "interior"}
    assert cube["samples"] == 2
    assert s["train"] and s["run_config"]["command"] == "report"
    assert "corner+edge" in (tmp_path / "a" / "summary.txt").read_text()


def test_report_empty_dir(tmp_path):
    assert main(["report", str(tmp_path)]) == 3
    assert main(["report", str(tmp_path / "missing")]) == 3


def test_usage_errors_exit_2_via_subprocess(tmp_path):
    r = subprocess.run([sys.executable, "-m", "voxgrad", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2 and r.stdout == "" and "invalid choice" in r.stderr
    r = subprocess.run([sys.executable, "-m", "voxgrad", "report", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 3 and r.stdout == "" and "input error" in r.stderr


def test_divergence_exits_4(run, tmp_path):
    assert main(["train", "--manifest", manifest(run), "--epochs", "2", "--lr", "1e200",
                 "--out", str(tmp_path)]) == 4
