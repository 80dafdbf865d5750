"""Greedy and beam-search decoding with length penalty and trigram blocking.

Finished hypotheses are ranked by ``logprob / lp(length)`` with
``lp(length) = ((5 + length) / 6) ** alpha``; length counts generated
summary tokens.  The end token is masked out until ``min_len`` tokens have
been produced and generation is cut off at ``max_len``.  With
``block_trigrams`` a hypothesis is never extended by a token that would
repeat one of its existing trigrams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import log_softmax_values
from .model import EncodedBatch, SummModel
from .text import BOS_ID, EOS_ID, PAD_ID, QSEP_ID

# Never generated: structural ids that cannot appear inside a summary.
STRUCTURAL_IDS = (PAD_ID, BOS_ID, QSEP_ID)


@dataclass
class DecodeConfig:
    beam: int = 5
    alpha: float = 0.4
    min_len: int = 1
    max_len: int = 100
    block_trigrams: bool = False
    max_doc_tokens: int | None = None  # per-document truncation at decode time
    max_docs: int | None = None

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError(f"beam must be >= 1, got {self.beam}")
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")


def length_penalty(length: int, alpha: float) -> float:
    return ((5.0 + length) / 6.0) ** alpha


def _banned_by_trigram(tokens: list[int]) -> set[int]:
    """Continuations that would repeat a trigram already in ``tokens``."""
    if len(tokens) < 2:
        return set()
    seen = {tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)}
    a, b = tokens[-2], tokens[-1]
    return {w for (x, y, w) in seen if (x, y) == (a, b)}


def _step_logprobs(model: SummModel, tokens: list[int], enc: EncodedBatch) -> np.ndarray:
    logits = model.decode_logits([BOS_ID] + tokens, enc.memory, enc.memory_mask)
    return log_softmax_values(logits.values[-1])


def _masked_logprobs(model, tokens, enc, config) -> np.ndarray:
    logp = _step_logprobs(model, tokens, enc).astype(np.float64).copy()
    logp[list(STRUCTURAL_IDS)] = -np.inf
    if len(tokens) < config.min_len:
        logp[EOS_ID] = -np.inf
    if config.block_trigrams:
        banned = _banned_by_trigram(tokens)
        if banned:
            logp[list(banned)] = -np.inf
    return logp


def greedy_decode(model: SummModel, enc: EncodedBatch, config: DecodeConfig) -> list[int]:
    """Pick the argmax token every step; ties go to the lowest id."""
    tokens: list[int] = []
    while len(tokens) < config.max_len:
        logp = _masked_logprobs(model, tokens, enc, config)
        if not np.isfinite(logp).any():
            break  # every continuation banned; terminate early
        nxt = int(np.argmax(logp))
        if nxt == EOS_ID:
            break
        tokens.append(nxt)
    return tokens


def beam_search_nbest(
    model: SummModel, enc: EncodedBatch, config: DecodeConfig
) -> list[tuple[list[int], float]]:
    """All finished hypotheses sorted by length-normalized score, best
    first.  Ties break toward lexicographically smaller token sequences."""
    active: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []
    while active:
        expansions: list[tuple[list[int], float]] = []
        for tokens, score in active:
            if len(tokens) >= config.max_len:
                finished.append((tokens, score))
                continue
            logp = _masked_logprobs(model, tokens, enc, config)
            if not np.isfinite(logp).any():
                finished.append((tokens, score))
                continue
            order = np.lexsort((np.arange(logp.size), -logp))
            for v in order[: config.beam]:
                lp_v = logp[v]
                if not np.isfinite(lp_v):
                    break
                if v == EOS_ID:
                    finished.append((tokens, score + float(lp_v)))
                else:
                    expansions.append((tokens + [int(v)], score + float(lp_v)))
        expansions.sort(key=lambda ts: (-ts[1], ts[0]))
        active = expansions[: config.beam]
    ranked = [
        (tokens, score / length_penalty(len(tokens), config.alpha))
        for tokens, score in finished
    ]
    ranked.sort(key=lambda ts: (-ts[1], ts[0]))
    return ranked


def beam_search(model: SummModel, enc: EncodedBatch, config: DecodeConfig) -> list[int]:
    """Best hypothesis of ``beam_search_nbest``."""
    ranked = beam_search_nbest(model, enc, config)
    return ranked[0][0] if ranked else []
