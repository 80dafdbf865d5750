import json

import pytest

from querysumm import cli
from querysumm.data import load_triplets, save_articles, save_ir_records, save_triplets
from querysumm.synthetic import make_articles, make_ir_records
from querysumm.training import NumericalAbort


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    save_articles(make_articles(8, seed=5, min_paragraphs=2, max_paragraphs=3), "articles.jsonl")
    save_ir_records(make_ir_records(10, seed=5), "records.jsonl")
    return tmp_path


def run(*argv):
    return cli.main(list(argv))


def train_config(tmp_path, steps=3):
    cfg = {
        "vocab_max_size": 300,
        "model": {
            "d_model": 16, "ffn_hidden": 32, "heads": 2, "local_layers": 1,
            "query_layers": 0, "global_layers": 1, "dropout": 0.0,
            "max_doc_tokens": 20, "max_docs": 2, "max_summary_tokens": 10,
        },
        "train": {
            "steps": steps, "checkpoint_dir": str(tmp_path / "ckpt"),
            "batch_tokens": 256, "val_interval": 2, "seed": 0,
            "base_lr": 1.0, "warmup": 50,
            "train_path": "triplets.jsonl", "val_path": "triplets.jsonl",
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestDatasetCommands:
    def test_build_qmdscnn(self, workdir, capsys):
        assert run("build-qmdscnn", "--corpus", "articles.jsonl", "--seed", "5",
                   "--k", "2", "--out", "triplets.jsonl") == 0
        assert len(load_triplets("triplets.jsonl")) == 8
        assert "wrote 8 triplets" in capsys.readouterr().out

    def test_build_qmdsir_with_reject_log(self, workdir, capsys):
        assert run("build-qmdsir", "--records", "records.jsonl",
                   "--out", "ir.jsonl", "--reject-log", "rej.jsonl") == 0
        kept = load_triplets("ir.jsonl")
        rejected = [json.loads(l) for l in open("rej.jsonl")]
        assert len(kept) + len(rejected) == 10
        for entry in rejected:
            assert set(entry) == {"record", "reason"}

    def test_stats_and_align_hist(self, workdir, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--out", "triplets.jsonl")
        assert run("stats", "--in", "triplets.jsonl") == 0
        out = capsys.readouterr().out
        assert "samples 8" in out and "avg_documents" in out
        assert run("align-hist", "--in", "triplets.jsonl") == 0
        hist_out = capsys.readouterr().out.strip().splitlines()
        assert all(len(line.split()) == 2 for line in hist_out)

    def test_query_variant(self, workdir, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--out", "triplets.jsonl")
        assert run("query-variant", "--in", "triplets.jsonl",
                   "--variant", "dull", "--out", "dull.jsonl") == 0
        assert all(t.query == "what is it ?" for t in load_triplets("dull.jsonl"))

    def test_missing_file_is_validation_error(self, workdir, capsys):
        assert run("stats", "--in", "nope.jsonl") == cli.EXIT_VALIDATION


class TestModelCommands:
    def test_train_decode_evaluate(self, workdir, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--k", "1", "--out", "triplets.jsonl")
        cfg = train_config(workdir)
        assert run("train", "--config", str(cfg)) == 0
        out = capsys.readouterr().out
        assert "best checkpoint" in out
        ckpt = str(workdir / "ckpt" / "best.ckpt")
        assert run("decode", "--ckpt", ckpt, "--in", "triplets.jsonl",
                   "--out", "decodes.jsonl", "--beam", "2", "--max-len", "6") == 0
        rows = [json.loads(l) for l in open("decodes.jsonl")]
        assert len(rows) == 8 and all(set(r) == {"id", "summary"} for r in rows)
        assert run("evaluate", "--ckpt", ckpt, "--in", "triplets.jsonl",
                   "--mode", "recall250", "--beam", "1", "--max-len", "6") == 0
        out = capsys.readouterr().out
        assert "rouge-su4" in out

    def test_train_resume(self, workdir, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--k", "1", "--out", "triplets.jsonl")
        cfg = train_config(workdir, steps=2)
        assert run("train", "--config", str(cfg)) == 0
        cfg6 = train_config(workdir, steps=4)
        assert run("train", "--config", str(cfg6), "--resume",
                   str(workdir / "ckpt" / "latest.ckpt")) == 0

    def test_transfer(self, workdir, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--k", "1", "--out", "triplets.jsonl")
        trips = load_triplets("triplets.jsonl")
        save_triplets(trips[:4], "src_a.jsonl")
        save_triplets(trips[4:6], "src_a_val.jsonl")
        save_triplets(trips[6:], "src_b.jsonl")
        save_triplets(trips[:2], "eval.jsonl")
        cfg = {
            "vocab_max_size": 300,
            "model": {
                "d_model": 16, "ffn_hidden": 32, "heads": 2, "local_layers": 1,
                "query_layers": 0, "global_layers": 1, "dropout": 0.0,
                "max_doc_tokens": 20, "max_docs": 2, "max_summary_tokens": 10,
            },
            "train": {
                "steps": 2, "checkpoint_dir": str(workdir / "tr"), "batch_tokens": 256,
                "val_interval": 1, "seed": 0, "base_lr": 1.0, "warmup": 50,
            },
            "decode": {"beam": 1, "alpha": 0.0, "min_len": 1, "max_len": 6},
            "sources": {
                "alpha": {"train": "src_a.jsonl", "val": "src_a_val.jsonl"},
                "beta": {"train": "src_b.jsonl", "val": "src_a_val.jsonl"},
            },
        }
        cfg_path = workdir / "transfer.json"
        cfg_path.write_text(json.dumps(cfg))
        assert run("transfer", "--config", str(cfg_path), "--source", "alpha",
                   "--eval", "eval.jsonl") == 0
        assert "rouge-1" in capsys.readouterr().out
        assert run("transfer", "--config", str(cfg_path), "--source", "combined",
                   "--eval", "eval.jsonl") == 0
        assert run("transfer", "--config", str(cfg_path), "--source", "missing",
                   "--eval", "eval.jsonl") == cli.EXIT_VALIDATION

    def test_grad_check_single_module(self, workdir, capsys):
        assert run("grad-check", "--module", "merge") == 0
        assert "merge" in capsys.readouterr().out

    def test_numerical_abort_exit_code(self, workdir, monkeypatch, capsys):
        run("build-qmdscnn", "--corpus", "articles.jsonl", "--out", "triplets.jsonl")
        cfg = train_config(workdir)

        def explode(*a, **kw):
            raise NumericalAbort(7, float("nan"))

        monkeypatch.setattr(cli, "train", explode)
        assert run("train", "--config", str(cfg)) == cli.EXIT_NUMERICAL
        assert "step 7" in capsys.readouterr().err
