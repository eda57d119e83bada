import csv
import json
import os

import numpy as np
import pytest

from csiauth.cli import main
from csiauth.datafile import read_records

TINY_CFG = {
    "sigma_tau": 50.0, "t_s": 150.0, "m_b": 2, "m_a": 1, "n_tones": 8,
    "xi_variance": 50.0, "n_train_per_class": 12, "n_test_per_class": 6,
    "n_unlabeled": 10, "n_labeled_per_class": 4, "seed": 0,
}


@pytest.fixture
def tiny_dataset(tmp_path):
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(TINY_CFG))
    out = tmp_path / "ds"
    assert main(["gen", "--config", str(cfg_path), "--seed", "5",
                 "--out", str(out)]) == 0
    return out


def test_gen_writes_dataset_dir(tiny_dataset):
    names = sorted(os.listdir(tiny_dataset))
    assert names == ["config.json", "test.csia", "train.csia",
                     "unlabeled.csia", "validation.csia"]
    cfg = json.loads((tiny_dataset / "config.json").read_text())
    assert cfg["seed"] == 5


def test_train_eval_round_trip(tiny_dataset, tmp_path, capsys):
    ckpt = tmp_path / "net.ckpt"
    model_file = tmp_path / "model.cfg"
    model_file.write_text("conv1x3-4\nmaxpooling\nFC-16-4\nFC-4-1\n")
    assert main(["train", "--dataset", str(tiny_dataset), "--model",
                 str(model_file), "--out", str(ckpt), "--epochs", "2"]) == 0
    out_csv = tmp_path / "eval.csv"
    assert main(["eval", "--dataset", str(tiny_dataset), "--ckpt", str(ckpt),
                 "--out", str(out_csv)]) == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert len(rows) == 1
    assert 0.0 <= float(rows[0]["accuracy"]) <= 1.0
    assert rows[0]["wall_time_s"] != ""


def test_train_builtin_model_name(tiny_dataset, tmp_path):
    ckpt = tmp_path / "crnnr.ckpt"
    assert main(["train", "--dataset", str(tiny_dataset), "--model", "CRNN-r",
                 "--out", str(ckpt), "--epochs", "1"]) == 0
    assert ckpt.exists()


def test_train_unknown_model_usage_error(tiny_dataset, tmp_path):
    assert main(["train", "--dataset", str(tiny_dataset), "--model", "GPT-5",
                 "--out", str(tmp_path / "x.ckpt")]) == 2


def test_eval_bad_checkpoint_format_error(tiny_dataset, tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert main(["eval", "--dataset", str(tiny_dataset), "--ckpt", str(bad),
                 "--out", str(tmp_path / "o.csv")]) == 3


def test_baseline_np(tiny_dataset, tmp_path):
    out_csv = tmp_path / "np.csv"
    assert main(["baseline", "--method", "np", "--dataset", str(tiny_dataset),
                 "--out", str(out_csv)]) == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert rows[0]["method"] == "np"


def test_pseudolabel_round_trip(tiny_dataset, tmp_path):
    out = tmp_path / "pseudo.csia"
    assert main(["pseudolabel", "--labeled", str(tiny_dataset / "train.csia"),
                 "--unlabeled", str(tiny_dataset / "unlabeled.csia"),
                 "--out", str(out)]) == 0
    rec = read_records(out)
    assert rec.pseudo
    assert len(rec.samples) == TINY_CFG["n_unlabeled"]
    assert all(s.label in (0, 1) for s in rec.samples)
    # head records carry the final cluster centers
    assert rec.mean_alice is not None and rec.mean_eve is not None


def test_semitrain_writes_checkpoints(tiny_dataset, tmp_path):
    model_file = tmp_path / "model.cfg"
    model_file.write_text("conv1x3-4\nmaxpooling\nFC-16-4\nFC-4-1\n")
    dnn2 = tmp_path / "dnn2.ckpt"
    dnn1 = tmp_path / "dnn1.ckpt"
    # NOTE: slow-ish (full default schedules would be 100 epochs); use the
    # small dataset so the run stays fast
    rc = main(["semitrain", "--labeled", str(tiny_dataset / "train.csia"),
               "--unlabeled", str(tiny_dataset / "unlabeled.csia"),
               "--model", str(model_file), "--out", str(dnn2),
               "--pretrain-out", str(dnn1), "--seed", "1"])
    assert rc == 0
    from csiauth.models import load_checkpoint
    cfg2, store2 = load_checkpoint(dnn2)
    cfg1, store1 = load_checkpoint(dnn1)
    # feature layers identical between DNN1 and DNN2
    assert store1["layer0.filters"].tobytes() == store2["layer0.filters"].tobytes()
    assert store1["layer2.weight"].tobytes() != store2["layer2.weight"].tobytes()


def test_reproduce_usage_error_on_bad_target(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["reproduce", "--target", "table-everything", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_gen_missing_config_file(tmp_path):
    assert main(["gen", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "ds")]) == 2


def test_gen_truncated_dataset_rejected_by_train(tiny_dataset, tmp_path):
    f = tiny_dataset / "train.csia"
    f.write_bytes(f.read_bytes()[:-7])
    assert main(["train", "--dataset", str(tiny_dataset), "--model", "CNN-r",
                 "--out", str(tmp_path / "x.ckpt")]) == 3
