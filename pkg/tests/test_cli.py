"""Command-line interface: exit codes, outputs, seeded reproducibility."""

import json

import numpy as np
import pytest

from bagside.cli import main
from bagside.corpus import save_embedding_file

from conftest import make_separable_dataset


def write_corpus(dirpath, data):
    """Serialize a BagDataset into the on-disk corpus layout."""
    dirpath.mkdir(parents=True, exist_ok=True)
    (dirpath / "relations.txt").write_text("\n".join(data.vocab.relations) + "\n")
    (dirpath / "types.txt").write_text("\n".join(data.vocab.types) + "\n")
    (dirpath / "aliases.txt").write_text("\n".join(data.vocab.aliases) + "\n")
    save_embedding_file(dirpath / "emb.bin", data.embeddings)
    lines = []
    for bag in data.bags:
        lines.append(json.dumps({
            "sub": bag.sub, "obj": bag.obj, "rel": bag.rel,
            "sub_types": list(bag.sub_types), "obj_types": list(bag.obj_types),
            "sentences": [
                {"emb": s.emb_row, "aliases": list(s.alias_ids)}
                for s in bag.sentences],
        }))
    (dirpath / "bags.jsonl").write_text("\n".join(lines) + "\n")
    return {
        "bags": str(dirpath / "bags.jsonl"),
        "embeddings": str(dirpath / "emb.bin"),
        "vocab_dir": str(dirpath),
    }


SMALL_NET = ["--u1", "16", "--u2", "8", "--a1", "relu", "--a2", "tanh",
             "--p1", "0", "--p2", "0", "--optimizer", "sgd", "--lr", "0.1"]


def train_args(paths, out, extra=()):
    return ["train",
            "--bags-train", paths["bags"], "--bags-valid", paths["bags"],
            "--embeddings", paths["embeddings"], "--vocab-dir", paths["vocab_dir"],
            "--out", str(out), "--seed", "5",
            *SMALL_NET, "--batch-size", "32", *extra]


@pytest.fixture(scope="module")
def big_corpus(tmp_path_factory):
    """200 bags of 3-5 sentences: 400 candidate triples in every mode."""
    data = make_separable_dataset(200, n_rel=3, min_sents=3, max_sents=5,
                                  noise=0.05, seed=31)
    root = tmp_path_factory.mktemp("big_corpus")
    return write_corpus(root, data)


@pytest.fixture(scope="module")
def big_checkpoint(big_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("big_run")
    rc = main(train_args(big_corpus, out,
                         extra=["--max-epochs", "6", "--patience", "6"]))
    assert rc == 0
    ckpt = out / "checkpoint.bsd"
    assert ckpt.is_file()
    return ckpt


class TestExitCodes:
    def test_validate_ok(self, fixtures_dir, capsys):
        rc = main(["validate",
                   "--bags", str(fixtures_dir / "bags_test.jsonl"),
                   "--embeddings", str(fixtures_dir / "emb_small.bin"),
                   "--vocab-dir", str(fixtures_dir)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "bags=15 sentences=55 relations=3 embedding_rows=180 embedding_dim=16" in out
        assert "rel NA: 5" in out

    def test_missing_flags_is_usage_error(self, capsys):
        rc = main(["validate"])
        err = capsys.readouterr().err
        assert rc == 64
        assert "--bags" in err and "--embeddings" in err

    def test_missing_checkpoint_flag_is_usage_error(self, fixtures_dir, capsys):
        rc = main(["eval",
                   "--bags", str(fixtures_dir / "bags_test.jsonl"),
                   "--embeddings", str(fixtures_dir / "emb_small.bin"),
                   "--vocab-dir", str(fixtures_dir)])
        assert rc == 64

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 64

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert main([]) == 0

    def test_missing_file_is_input_error(self, fixtures_dir, capsys):
        rc = main(["validate",
                   "--bags", "/nonexistent/bags.jsonl",
                   "--embeddings", str(fixtures_dir / "emb_small.bin"),
                   "--vocab-dir", str(fixtures_dir)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "input" in err

    def test_unknown_config_key_is_input_error(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"no_such_setting": 1}))
        rc = main(["validate", "--config", str(cfg)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "no_such_setting" in err

    def test_huge_lr_is_divergence_error(self, tmp_path, capsys):
        data = make_separable_dataset(12, seed=2)
        paths = write_corpus(tmp_path / "corpus", data)
        with np.errstate(all="ignore"):
            rc = main(train_args(paths, tmp_path / "out",
                                 extra=["--max-epochs", "2", "--patience", "2",
                                        "--lr", "1e200"]))
        err = capsys.readouterr().err
        assert rc == 3
        assert "diverged" in err

    def test_unreachable_cutoff_is_infeasible(self, big_corpus, big_checkpoint, tmp_path, capsys):
        rc = main(["eval", "--checkpoint", str(big_checkpoint),
                   "--bags", big_corpus["bags"],
                   "--embeddings", big_corpus["embeddings"],
                   "--vocab-dir", big_corpus["vocab_dir"],
                   "--out", str(tmp_path), "--n", "500"])
        err = capsys.readouterr().err
        assert rc == 4
        assert "infeasible" in err

    def test_subsampling_without_big_bags_is_infeasible(self, tmp_path, capsys):
        data = make_separable_dataset(10, min_sents=2, max_sents=2, seed=3)
        paths = write_corpus(tmp_path / "corpus", data)
        rc = main(train_args(paths, tmp_path / "out",
                             extra=["--max-epochs", "1", "--patience", "1"]))
        assert rc == 0
        rc = main(["eval", "--checkpoint", str(tmp_path / "out" / "checkpoint.bsd"),
                   "--bags", paths["bags"],
                   "--embeddings", paths["embeddings"],
                   "--vocab-dir", paths["vocab_dir"],
                   "--out", str(tmp_path / "eval"),
                   "--mode", "one", "--n", "5"])
        assert rc == 4


class TestEvalReport:
    def test_nine_row_table(self, big_corpus, big_checkpoint, tmp_path, capsys):
        rc = main(["eval", "--checkpoint", str(big_checkpoint),
                   "--bags", big_corpus["bags"],
                   "--embeddings", big_corpus["embeddings"],
                   "--vocab-dir", big_corpus["vocab_dir"],
                   "--out", str(tmp_path),
                   "--mode", "one,two,all", "--n", "100,200,300",
                   "--eval-seed", "77"])
        out = capsys.readouterr().out
        assert rc == 0
        csv_lines = (tmp_path / "pn.csv").read_text().splitlines()
        assert csv_lines[0] == "mode,n,precision"
        assert len(csv_lines) == 10
        cells = [tuple(line.split(",")[:2]) for line in csv_lines[1:]]
        assert cells == [(m, n) for m in ("one", "two", "all")
                         for n in ("100", "200", "300")]
        for line in csv_lines[1:]:
            precision = float(line.split(",")[2])
            assert 0.0 <= precision <= 1.0
        # stdout carries the same nine rows
        assert sum(1 for line in out.splitlines()
                   if line.split(",")[0] in ("one", "two", "all")) == 9

    def test_eval_seed_changes_subsampled_cells(self, big_corpus, big_checkpoint,
                                                tmp_path, capsys):
        outs = []
        for seed in ("1", "2"):
            d = tmp_path / seed
            rc = main(["eval", "--checkpoint", str(big_checkpoint),
                       "--bags", big_corpus["bags"],
                       "--embeddings", big_corpus["embeddings"],
                       "--vocab-dir", big_corpus["vocab_dir"],
                       "--out", str(d), "--eval-seed", seed,
                       "--mode", "all", "--n", "100"])
            assert rc == 0
            outs.append((d / "pn.csv").read_text())
        capsys.readouterr()
        # mode "all" ignores the subsampling seed entirely
        assert outs[0] == outs[1]


class TestReproducibility:
    def test_train_byte_identical(self, big_corpus, tmp_path, capsys):
        raws = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(train_args(big_corpus, out,
                                 extra=["--max-epochs", "2", "--patience", "2"]))
            assert rc == 0
            raws.append(((out / "checkpoint.bsd").read_bytes(),
                         (out / "history.csv").read_text()))
        capsys.readouterr()
        assert raws[0][0] == raws[1][0]
        assert raws[0][1] == raws[1][1]

    def test_eval_byte_identical(self, big_corpus, big_checkpoint, tmp_path, capsys):
        texts = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["eval", "--checkpoint", str(big_checkpoint),
                       "--bags", big_corpus["bags"],
                       "--embeddings", big_corpus["embeddings"],
                       "--vocab-dir", big_corpus["vocab_dir"],
                       "--out", str(out), "--eval-seed", "7",
                       "--mode", "one,two,all", "--n", "50,100"])
            assert rc == 0
            texts.append((out / "pn.csv").read_text())
        capsys.readouterr()
        assert texts[0] == texts[1]


class TestTune:
    def test_three_trials(self, tmp_path, capsys):
        data = make_separable_dataset(16, seed=9)
        paths = write_corpus(tmp_path / "corpus", data)
        args = ["tune",
                "--bags-train", paths["bags"], "--bags-valid", paths["bags"],
                "--embeddings", paths["embeddings"], "--vocab-dir", paths["vocab_dir"],
                "--out", str(tmp_path / "t1"), "--seed", "11", "--trials", "3",
                "--max-epochs", "1", "--patience", "1", "--batch-size", "16"]
        with np.errstate(all="ignore"):
            rc = main(args)
        assert rc == 0
        lines = (tmp_path / "t1" / "trials.csv").read_text().splitlines()
        assert lines[0] == "trial,u1,a1,p1,u2,a2,p2,optimizer,lr,valid_acc,error"
        assert len(lines) == 4
        best = json.loads((tmp_path / "t1" / "best_config.json").read_text())
        assert best["u1"] in (48, 96, 192, 384, 768)
        assert best["u2"] in (6, 12, 24, 48)
        assert best["a1"] in ("tanh", "relu", "sigmoid")
        assert best["optimizer"] in ("sgd", "nadam")
        assert 0.0 < best["lr"] < 1.0

        args[args.index(str(tmp_path / "t1"))] = str(tmp_path / "t2")
        with np.errstate(all="ignore"):
            assert main(args) == 0
        capsys.readouterr()
        assert (tmp_path / "t1" / "trials.csv").read_text() == \
            (tmp_path / "t2" / "trials.csv").read_text()
        assert (tmp_path / "t1" / "best_config.json").read_text() == \
            (tmp_path / "t2" / "best_config.json").read_text()

    def test_zero_trials_rejected(self, capsys):
        assert main(["tune", "--trials", "0"]) == 64


class TestPredict:
    def test_writes_jsonl(self, big_corpus, big_checkpoint, tmp_path, capsys):
        rc = main(["predict", "--checkpoint", str(big_checkpoint),
                   "--bags", big_corpus["bags"],
                   "--embeddings", big_corpus["embeddings"],
                   "--vocab-dir", big_corpus["vocab_dir"],
                   "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "rows=200" in out
        lines = (tmp_path / "predictions.jsonl").read_text().splitlines()
        assert len(lines) == 200
        rec = json.loads(lines[0])
        assert set(rec) >= {"bag_id", "sub", "obj", "rel_id", "rel", "confidence"}
        assert 0.0 <= rec["confidence"] <= 1.0


class TestConfigFilePrecedence:
    def test_flag_beats_file(self, fixtures_dir, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "bags_test": str(fixtures_dir / "bags_test.jsonl"),
            "embeddings": str(fixtures_dir / "emb_small.bin"),
            "vocab_dir": str(fixtures_dir),
        }))
        rc = main(["validate", "--config", str(cfg)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "bags=15" in out

        rc = main(["validate", "--config", str(cfg),
                   "--bags", str(fixtures_dir / "bags_valid.jsonl")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "bags=12" in out
