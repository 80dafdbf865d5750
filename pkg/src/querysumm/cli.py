"""Command-line interface.

Dataset commands: ``build-qmdscnn``, ``build-qmdsir``, ``stats``,
``query-variant``, ``align-hist``.  Model commands: ``train``, ``decode``,
``evaluate``, ``transfer``, ``grad-check``.  Exit codes: 0 success,
1 validation error, 2 numerical abort.

``train`` and ``transfer`` read a JSON config file::

    {
      "vocab_max_size": 2000,
      "model": { ... ModelConfig fields except vocab_size ... },
      "train": { ... TrainConfig fields ... },
      "decode": { ... DecodeConfig fields ... },            # transfer only
      "finetune": { ... TrainConfig fields ... },           # optional
      "sources": {"qmdscnn": {"train": P, "val": P}, ...}   # transfer only
    }
"""

from __future__ import annotations

import argparse
import json
import sys

from . import data as dataforge
from .data import load_articles, load_ir_records, load_triplets, save_triplets
from .decoding import DecodeConfig, beam_search
from .evaluation import (
    TRANSFER_DECODE_DEFAULTS,
    TransferSpec,
    evaluate,
    interleave,
    transfer_pipeline,
)
from .model import ModelConfig, SummModel, prepare_input
from .text import build_vocab, tokenize
from .training import NumericalAbort, TrainConfig, load_model_checkpoint, train
from .verification import TOLERANCE, run_gradient_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="querysumm",
        description="Query-focused multi-document summarization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-qmdscnn", help="article corpus -> retrieval-augmented triplets")
    p.add_argument("--corpus", required=True, help="articles JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=4, help="retrieved chunks per triplet")
    p.add_argument("--out", required=True, help="triplets JSONL")

    p = sub.add_parser("build-qmdsir", help="IR-log records -> filtered triplets")
    p.add_argument("--records", required=True, help="records JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--reject-log", default=None, help="JSONL of rejected record reasons")

    p = sub.add_parser("stats", help="triplet corpus statistics")
    p.add_argument("--in", dest="input", required=True)

    p = sub.add_parser("query-variant", help="swap triplet queries for ablations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument(
        "--variant",
        required=True,
        choices=["original", "distractor", "dull", "dissimilar"],
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("align-hist", help="summary-to-document span histogram")
    p.add_argument("--in", dest="input", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")

    p = sub.add_parser("decode", help="decode triplets with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-len", type=int, default=100)
    p.add_argument("--block-trigrams", action="store_true")

    p = sub.add_parser("evaluate", help="ROUGE report for a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=["f1", "recall250"], default="f1")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-len", type=int, default=100)
    p.add_argument("--block-trigrams", action="store_true")

    p = sub.add_parser("transfer", help="train on a source tag, then evaluate")
    p.add_argument("--config", required=True)
    p.add_argument("--source", required=True, help="source tag or 'combined'")
    p.add_argument("--eval", dest="eval_path", required=True)
    p.add_argument("--finetune", default=None, help="fine-tuning triplets JSONL")

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--module", default=None, help="single check name to run")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _corpus_tokens(triplets):
    for t in triplets:
        yield tokenize(t.query)
        yield tokenize(t.summary)
        for d in t.documents:
            yield tokenize(d)


def _load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _vocab_and_model(cfg: dict, train_triplets):
    vocab = build_vocab(list(_corpus_tokens(train_triplets)), cfg.get("vocab_max_size", 2000))
    model_cfg = ModelConfig(vocab_size=len(vocab), **cfg.get("model", {}))
    train_cfg = TrainConfig(**cfg["train"])
    return vocab, model_cfg, train_cfg


def cmd_build_qmdscnn(args) -> int:
    corpus = load_articles(args.corpus)
    triplets = dataforge.build_qmdscnn(corpus, seed=args.seed, k_retrieved=args.k)
    save_triplets(triplets, args.out)
    print(f"wrote {len(triplets)} triplets to {args.out}")
    return EXIT_OK


def cmd_build_qmdsir(args) -> int:
    records = load_ir_records(args.records)
    kept, rejected = dataforge.filter_qmdsir(records)
    save_triplets(kept, args.out)
    if args.reject_log:
        with open(args.reject_log, "w", encoding="utf-8") as fh:
            for idx, reason in rejected:
                fh.write(json.dumps({"record": idx, "reason": reason}) + "\n")
    print(f"kept {len(kept)} of {len(records)} records ({len(rejected)} rejected)")
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = dataforge.triplet_stats(load_triplets(args.input))
    print(f"samples {stats.samples}")
    print(f"avg_documents {stats.avg_documents:.4f}")
    print(f"avg_document_tokens {stats.avg_document_tokens:.4f}")
    print(f"avg_query_tokens {stats.avg_query_tokens:.4f}")
    return EXIT_OK


def cmd_query_variant(args) -> int:
    triplets = dataforge.make_query_variant(
        load_triplets(args.input), args.variant, seed=args.seed
    )
    save_triplets(triplets, args.out)
    print(f"wrote {len(triplets)} {args.variant}-query triplets to {args.out}")
    return EXIT_OK


def cmd_align_hist(args) -> int:
    hist = dataforge.alignment_histogram(load_triplets(args.input))
    for spans in sorted(hist):
        print(f"{spans} {hist[spans]}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    train_triplets = load_triplets(cfg["train"]["train_path"])
    val_triplets = load_triplets(cfg["train"]["val_path"])
    vocab, model_cfg, train_cfg = _vocab_and_model(cfg, train_triplets)
    model = SummModel(model_cfg, seed=train_cfg.seed)
    result = train(model, train_cfg, train_triplets, val_triplets, vocab, resume_from=args.resume)
    print(f"best checkpoint {result.best_path} (val ROUGE-L {result.best_score:.4f})")
    print(f"latest checkpoint {result.latest_path} after {result.steps_run} steps")
    return EXIT_OK


def _decode_config(args) -> DecodeConfig:
    return DecodeConfig(
        beam=args.beam,
        alpha=args.alpha,
        min_len=args.min_len,
        max_len=args.max_len,
        block_trigrams=args.block_trigrams,
    )


def cmd_decode(args) -> int:
    model, vocab, _ = load_model_checkpoint(args.ckpt)
    triplets = load_triplets(args.input)
    decode_cfg = _decode_config(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        for i, triplet in enumerate(triplets):
            inp = prepare_input(triplet, vocab, model.config)
            enc = model.encode(inp)
            ids = beam_search(model, enc, decode_cfg)
            summary = " ".join(vocab.decode(ids))
            fh.write(
                json.dumps(
                    {"id": triplet.meta.get("source_id", i), "summary": summary},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"decoded {len(triplets)} triplets to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, vocab, _ = load_model_checkpoint(args.ckpt)
    triplets = load_triplets(args.input)
    report = evaluate(model, triplets, vocab, _decode_config(args), mode=args.mode)
    print(report.format())
    return EXIT_OK


def cmd_transfer(args) -> int:
    cfg = _load_config(args.config)
    sources = cfg["sources"]
    if args.source == "combined":
        if len(sources) != 2:
            raise ValueError("combined mode needs exactly two sources in the config")
        (tag_a, a), (tag_b, b) = sources.items()
        seed = cfg["train"].get("seed", 0)
        train_triplets = interleave(
            load_triplets(a["train"]), load_triplets(b["train"]), seed
        )
        val_triplets = interleave(load_triplets(a["val"]), load_triplets(b["val"]), seed)
    elif args.source in sources:
        src = sources[args.source]
        train_triplets = load_triplets(src["train"])
        val_triplets = load_triplets(src["val"])
    else:
        raise ValueError(f"unknown source {args.source!r}; config has {list(sources)}")

    eval_triplets = load_triplets(args.eval_path)
    vocab, model_cfg, train_cfg = _vocab_and_model(cfg, train_triplets)
    decode_cfg = (
        DecodeConfig(**cfg["decode"]) if "decode" in cfg else TRANSFER_DECODE_DEFAULTS
    )
    finetune_cfg = TrainConfig(**cfg["finetune"]) if "finetune" in cfg else None
    finetune_triplets = load_triplets(args.finetune) if args.finetune else None
    spec = TransferSpec(model_cfg, train_cfg, decode_cfg, finetune_cfg)
    report, _ = transfer_pipeline(
        spec, train_triplets, val_triplets, eval_triplets, vocab, finetune_triplets
    )
    print(report.format())
    return EXIT_OK


def cmd_grad_check(args) -> int:
    names = [args.module] if args.module else None
    results = run_gradient_suite(names, seed=args.seed)
    worst = 0.0
    for name, err in results.items():
        status = "ok" if err < TOLERANCE else "FAIL"
        print(f"{name} max_rel_err {err:.3e} {status}")
        worst = max(worst, err)
    return EXIT_OK if worst < TOLERANCE else EXIT_VALIDATION


COMMANDS = {
    "build-qmdscnn": cmd_build_qmdscnn,
    "build-qmdsir": cmd_build_qmdsir,
    "stats": cmd_stats,
    "query-variant": cmd_query_variant,
    "align-hist": cmd_align_hist,
    "train": cmd_train,
    "decode": cmd_decode,
    "evaluate": cmd_evaluate,
    "transfer": cmd_transfer,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, FileNotFoundError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
