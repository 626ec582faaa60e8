import json

import numpy as np
import pytest

from tagrank.baselines import KnnConfig, knn_posterior
from tagrank.cli import main
from tagrank.core import Dataset
from tagrank.data import load_dataset, save_dataset
from tagrank.metrics import compute_metrics, topk_indicator

from test_optimizer import separable_toy

SMALL = ["--tags", "12", "--dim", "6", "--n", "240"]


@pytest.fixture
def small_split(tmp_path):
    d = tmp_path / "d.jsonl"
    assert main(["synth", *SMALL, "--seed", "3", "--out", str(d)]) == 0
    tr, te = tmp_path / "tr.jsonl", tmp_path / "te.jsonl"
    assert main(["split", "--data", str(d), "--seed", "1",
                 "--train-out", str(tr), "--test-out", str(te)]) == 0
    return tr, te


def test_synth_round_trip(tmp_path, capsys):
    out = tmp_path / "d.txt"
    assert main(["synth", "--tags", "81", "--dim", "64", "--n", "5000", "--seed", "7",
                 "--out", str(out)]) == 0
    ds = load_dataset(out)
    assert (len(ds), ds.num_tags, ds.dim) == (5000, 81, 64)
    assert "c=81" in capsys.readouterr().out


def test_synth_missing_out():
    assert main(["synth", "--tags", "5"]) == 1


def test_synth_zero_tags(tmp_path):
    assert main(["synth", "--tags", "0", "--out", str(tmp_path / "x")]) == 2


def test_no_command():
    assert main([]) == 1


def test_unknown_flag():
    assert main(["synth", "--bogus"]) == 1


def test_train_bogus_loss(small_split, capsys):
    tr, _ = small_split
    assert main(["train", "--data", str(tr), "--loss", "bogus"]) == 1
    err = capsys.readouterr().err
    assert "softmax" in err and "pairwise" in err and "warp" in err


def test_train_deterministic(small_split, tmp_path):
    tr, _ = small_split
    outs = []
    for i in range(2):
        ck, log = tmp_path / f"m{i}.ckpt", tmp_path / f"m{i}.log"
        assert main(["train", "--data", str(tr), "--loss", "warp", "--seed", "1",
                     "--epochs", "2", "--hidden", "16", "--out", str(ck), "--log", str(log)]) == 0
        outs.append((ck.read_bytes(), log.read_bytes()))
    assert outs[0] == outs[1]
    rec = json.loads(outs[0][1].splitlines()[0])
    assert set(rec) == {"epoch", "step", "lr", "mean_loss"}


def test_train_log_timing(small_split, tmp_path):
    tr, _ = small_split
    log = tmp_path / "t.log"
    assert main(["train", "--data", str(tr), "--epochs", "1", "--hidden", "4",
                 "--out", str(tmp_path / "m"), "--log", str(log), "--log-timing"]) == 0
    assert "elapsed_seconds" in json.loads(log.read_text().splitlines()[0])


def test_train_softmax_toy_converges(tmp_path):
    d = tmp_path / "toy.jsonl"
    save_dataset(separable_toy(), d)
    log = tmp_path / "toy.log"
    assert main(["train", "--data", str(d), "--loss", "softmax", "--hidden", "none",
                 "--dropout", "0", "--epochs", "200", "--out", str(tmp_path / "toy.ckpt"),
                 "--log", str(log)]) == 0
    assert json.loads(log.read_text().splitlines()[-1])["mean_loss"] < 0.1


def test_train_numerical_failure(tmp_path):
    d = tmp_path / "bad.jsonl"
    save_dataset(Dataset.from_arrays([[1e300, 1e300], [-1e300, 1e300]], [[0], [1]], 2), d)
    assert main(["train", "--data", str(d), "--loss", "pairwise", "--hidden", "none",
                 "--lr", "1", "--epochs", "3", "--out", str(tmp_path / "m")]) == 3


def test_config_file_and_override(small_split, tmp_path):
    tr, _ = small_split
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"data: {tr}\nepochs: 1\nhidden: none\nloss: softmax\nout: {tmp_path / 'a.ckpt'}\n")
    assert main(["train", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg), "--loss", "bogus"]) == 1
    cfg.write_text("nonsense_key: 1\n")
    assert main(["train", "--config", str(cfg)]) == 1


def test_eval_upper_bound(tmp_path, capsys):
    ds = Dataset.from_arrays(np.zeros((4, 1)), [[0, 1, 2], [1, 2, 3, 4], [0, 3, 4], [0, 1, 2, 3]], 5)
    d = tmp_path / "t.jsonl"
    save_dataset(ds, d)
    table = tmp_path / "ub.tsv"
    assert main(["eval", "--data", str(d), "--upper-bound", "--k", "3", "--table", str(table)]) == 0
    assert "overall_precision=100.00" in capsys.readouterr().out
    assert table.read_text().startswith("# k=3")


def test_eval_knn_matches_composition(small_split, tmp_path, capsys):
    tr, te = small_split
    table = tmp_path / "knn.tsv"
    assert main(["eval", "--data", str(te), "--knn", "--train", str(tr), "--k", "3",
                 "--knn-k", "10", "--table", str(table)]) == 0
    train_set, test_set = load_dataset(tr), load_dataset(te)
    S = np.array([knn_posterior(train_set, x, KnnConfig(10, 1.0)) for x in test_set.X])
    ref = compute_metrics(topk_indicator(S, 3), test_set, 3)
    assert table.read_text() == ref.to_table()


def test_eval_scorer_and_svm(small_split, tmp_path):
    tr, te = small_split
    ck = tmp_path / "m.ckpt"
    assert main(["train", "--data", str(tr), "--epochs", "1", "--hidden", "8", "--out", str(ck)]) == 0
    assert main(["eval", "--data", str(te), "--model", str(ck)]) == 0
    svm = tmp_path / "svm.ckpt"
    assert main(["eval", "--data", str(te), "--svm", "--train", str(tr), "--svm-epochs", "2",
                 "--save-model", str(svm), "--table", str(tmp_path / "a.tsv")]) == 0
    assert main(["eval", "--data", str(te), "--svm", "--model", str(svm),
                 "--table", str(tmp_path / "b.tsv")]) == 0
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()


def test_eval_tag_mismatch(small_split, tmp_path):
    tr, _ = small_split
    ck = tmp_path / "m.ckpt"
    assert main(["train", "--data", str(tr), "--epochs", "1", "--hidden", "4", "--out", str(ck)]) == 0
    other = tmp_path / "o.jsonl"
    assert main(["synth", "--tags", "13", "--dim", "6", "--n", "30", "--out", str(other)]) == 0
    assert main(["eval", "--data", str(other), "--model", str(ck)]) == 2


def test_eval_k_zero(small_split):
    assert main(["eval", "--data", str(small_split[1]), "--upper-bound", "--k", "0"]) == 1


def test_missing_file(tmp_path):
    assert main(["eval", "--data", str(tmp_path / "nope"), "--upper-bound"]) == 2


def test_compare_grid_shape_and_determinism(small_split, tmp_path, capsys):
    tr, _ = small_split
    grids = []
    for i in range(2):
        out = tmp_path / f"grid{i}.tsv"
        assert main(["compare", "--data", str(tr), "--k", "3,5", "--seeds", "0",
                     "--epochs", "2", "--hidden", "8", "--svm-epochs", "2", "--knn-k", "5",
                     "--out", str(out), "--tables-dir", str(tmp_path / f"tables{i}")]) == 0
        grids.append(out.read_bytes())
    assert grids[0] == grids[1]
    rows = grids[0].decode().splitlines()
    header, body = rows[0].split("\t"), [r.split("\t") for r in rows[1:]]
    assert header[2:] == ["per_class_recall", "per_class_precision", "overall_recall",
                          "overall_precision", "n_plus"]
    assert len(body) == 12
    for k in ("3", "5"):
        block = {r[1]: list(map(float, r[2:])) for r in body if r[0] == k}
        assert list(block) == ["upper_bound", "knn", "svm", "softmax", "pairwise", "warp"]
        assert all(block["upper_bound"][2] >= v[2] for v in block.values())
    t0 = sorted(p.name for p in (tmp_path / "tables0").iterdir())
    assert len(t0) == 12
    for name in t0:
        assert (tmp_path / "tables0" / name).read_bytes() == (tmp_path / "tables1" / name).read_bytes()
