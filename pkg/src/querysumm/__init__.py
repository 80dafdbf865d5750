"""Query-focused multi-document summarization toolkit.

Dataset construction (title-as-query chunked news corpora, filtered IR-log
records), BM25 retrieval augmentation, ROUGE-1/2/L/SU4 scoring, and a
hierarchical query-aware transformer summarizer with training, beam-search
decoding and evaluation, all on a small numpy reverse-mode autodiff core.
"""

from .bm25 import RetrievalIndex, build_index, top_k
from .data import (
    Article,
    IrRecord,
    Triplet,
    alignment_histogram,
    build_qmdscnn,
    chunk_article,
    filter_qmdsir,
    make_query_variant,
    triplet_stats,
)
from .decoding import DecodeConfig, beam_search, greedy_decode, length_penalty
from .evaluation import evaluate, transfer_pipeline
from .model import EncodedBatch, ModelConfig, SummModel, joint_flags, prepare_input
from .rouge import RougeScore, rouge_l, rouge_n, rouge_recall_truncated, rouge_su4
from .text import Vocabulary, build_vocab, split_sentences, tokenize
from .training import TrainConfig, load_model_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Article",
    "DecodeConfig",
    "EncodedBatch",
    "IrRecord",
    "ModelConfig",
    "RetrievalIndex",
    "RougeScore",
    "SummModel",
    "TrainConfig",
    "Triplet",
    "Vocabulary",
    "alignment_histogram",
    "beam_search",
    "build_index",
    "build_qmdscnn",
    "build_vocab",
    "chunk_article",
    "evaluate",
    "filter_qmdsir",
    "greedy_decode",
    "joint_flags",
    "length_penalty",
    "load_model_checkpoint",
    "make_query_variant",
    "prepare_input",
    "rouge_l",
    "rouge_n",
    "rouge_recall_truncated",
    "rouge_su4",
    "split_sentences",
    "tokenize",
    "top_k",
    "train",
    "transfer_pipeline",
    "triplet_stats",
]
