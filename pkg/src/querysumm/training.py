"""Training loop: token-budget batching, gradient accumulation, the warmup
optimizer, greedy validation decoding scored by ROUGE-L, and checkpointing.

One optimizer step consumes ``accum_steps`` micro-batches; gradients of the
per-example summed losses are accumulated and divided once by the total
token count, so k accumulated micro-batches update exactly like one k-fold
batch.  Batch order and dropout draws are pure functions of (seed, step),
which is what makes interrupted runs resumable bit-for-bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import backward
from .checkpoint import load_arrays, save_arrays
from .data import Triplet
from .decoding import DecodeConfig, greedy_decode
from .model import ModelConfig, ModelInput, SummModel, prepare_input
from .optim import AdamNoam
from .rouge import rouge_l
from .text import Vocabulary, tokenize


class NumericalAbort(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    steps: int
    checkpoint_dir: str
    batch_tokens: int = 2048
    accum_steps: int = 1
    val_interval: int = 100
    seed: int = 0
    base_lr: float = 1.0
    warmup: int = 8000
    train_path: str | None = None
    val_path: str | None = None
    fine_tune_from: str | None = None

    def __post_init__(self):
        if self.accum_steps < 1:
            raise ValueError("accum_steps must be >= 1")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class TrainResult:
    best_path: str
    latest_path: str
    best_score: float
    steps_run: int
    losses: list[float] = field(default_factory=list)
    val_scores: list[tuple[int, float]] = field(default_factory=list)


def example_size(inp: ModelInput) -> int:
    target = 0 if inp.target_ids is None else inp.target_ids.size
    return int(inp.token_mask.sum()) + target


def pack_batches(sizes: list[int], order: np.ndarray, budget: int) -> list[list[int]]:
    """Group example indices (in ``order``) greedily until the token budget
    is hit; every batch holds at least one example."""
    batches: list[list[int]] = []
    batch: list[int] = []
    used = 0
    for idx in order:
        size = sizes[int(idx)]
        if batch and used + size > budget:
            batches.append(batch)
            batch, used = [], 0
        batch.append(int(idx))
        used += size
    if batch:
        batches.append(batch)
    return batches


def validate(model: SummModel, val_inputs, val_refs, vocab: Vocabulary, decode_cfg=None) -> float:
    """Mean ROUGE-L F1 of greedy decodes against the references."""
    cfg = decode_cfg or DecodeConfig(
        beam=1, alpha=0.0, min_len=1, max_len=model.config.max_summary_tokens
    )
    scores = []
    for inp, ref_tokens in zip(val_inputs, val_refs):
        enc = model.encode(inp)
        hyp = vocab.decode(greedy_decode(model, enc, cfg))
        scores.append(rouge_l(hyp, ref_tokens).f1)
    return float(np.mean(scores)) if scores else 0.0


def save_model_checkpoint(path, model: SummModel, vocab: Vocabulary, meta: dict) -> None:
    meta = dict(meta)
    meta["model_config"] = asdict(model.config)
    meta["vocab"] = vocab.id_to_token[5:]
    save_arrays(path, model.state_arrays(), meta)


def load_model_checkpoint(path, dtype=np.float32) -> tuple[SummModel, Vocabulary, dict]:
    arrays, meta = load_arrays(path)
    config = ModelConfig(**meta["model_config"])
    vocab = Vocabulary(meta["vocab"])
    model = SummModel(config, seed=0, dtype=dtype)
    model.load_state_arrays(arrays)
    model.vocab = vocab
    return model, vocab, meta


def train(
    model: SummModel,
    cfg: TrainConfig,
    train_triplets: list[Triplet],
    val_triplets: list[Triplet],
    vocab: Vocabulary,
    resume_from: str | None = None,
) -> TrainResult:
    """Run the optimization loop and return paths to the best (by validation
    ROUGE-L) and latest checkpoints.  Raises ``NumericalAbort`` on a
    non-finite loss."""
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    model.vocab = vocab
    if cfg.fine_tune_from and not resume_from:
        arrays, _ = load_arrays(cfg.fine_tune_from)
        model.load_state_arrays(arrays)

    inputs = [prepare_input(t, vocab, model.config) for t in train_triplets]
    sizes = [example_size(inp) for inp in inputs]
    if max(sizes) > cfg.batch_tokens:
        raise ValueError(
            f"batch_tokens={cfg.batch_tokens} below largest example ({max(sizes)})"
        )
    val_inputs = [prepare_input(t, vocab, model.config) for t in val_triplets]
    val_refs = [tokenize(t.summary) for t in val_triplets]

    opt = AdamNoam(
        model.params, d_model=model.config.d_model, base_lr=cfg.base_lr, warmup=cfg.warmup
    )
    start_step = 0
    if resume_from:
        arrays, meta = load_arrays(resume_from)
        model.load_state_arrays(arrays)
        opt_arrays, opt_meta = load_arrays(resume_from + ".opt")
        opt.load_state_arrays(opt_arrays, step=opt_meta["step"])
        start_step = opt_meta["step"]

    def micro_batches():
        """Deterministic stream of micro-batches, reshuffled per epoch."""
        epoch = 0
        while True:
            order = np.random.default_rng([cfg.seed & 0xFFFFFFFF, 7, epoch]).permutation(
                len(inputs)
            )
            yield from pack_batches(sizes, order, cfg.batch_tokens)
            epoch += 1

    stream = micro_batches()
    for _ in range(start_step * cfg.accum_steps):
        next(stream)  # fast-forward a resumed run to its position

    best_path = os.path.join(cfg.checkpoint_dir, "best.ckpt")
    latest_path = os.path.join(cfg.checkpoint_dir, "latest.ckpt")
    best_score = -1.0
    if resume_from and os.path.exists(best_path):
        # Keep honoring the pre-interruption best instead of clobbering it.
        _, best_meta = load_arrays(best_path)
        best_score = best_meta.get("val_rouge_l", -1.0)
    result = TrainResult(best_path, latest_path, best_score=best_score, steps_run=start_step)

    step = start_step
    while step < cfg.steps:
        opt.zero_grad()
        total_loss, total_count = 0.0, 0
        for a in range(cfg.accum_steps):
            micro = step * cfg.accum_steps + a
            for idx in next(stream):
                rng = np.random.default_rng([cfg.seed & 0xFFFFFFFF, 11, micro, idx])
                loss_sum, count = model.loss_sum(inputs[idx], train=True, rng=rng)
                backward(loss_sum)
                total_loss += loss_sum.item()
                total_count += count
        if not np.isfinite(total_loss):
            raise NumericalAbort(step, total_loss)
        for p in model.params.values():
            if p.grad is not None:
                p.grad /= total_count
        opt.step()
        step += 1
        result.losses.append(total_loss / total_count)

        if step % cfg.val_interval == 0 or step == cfg.steps:
            score = validate(model, val_inputs, val_refs, vocab)
            result.val_scores.append((step, score))
            meta = {"step": step, "val_rouge_l": score}
            save_model_checkpoint(latest_path, model, vocab, meta)
            save_arrays(latest_path + ".opt", opt.state_arrays(), {"step": step})
            if score > result.best_score:
                result.best_score = score
                save_model_checkpoint(best_path, model, vocab, meta)
                save_arrays(best_path + ".opt", opt.state_arrays(), {"step": step})
    result.steps_run = step
    return result
