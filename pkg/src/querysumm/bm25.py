"""Okapi BM25 over an in-memory inverted index of text chunks.

The index is built once from ``(chunk_id, tokens, article_id)`` triples and
is immutable afterwards, so concurrent queries are safe.  Scores use the
non-negative idf variant ``ln(1 + (N - df + 0.5) / (df + 0.5))``; duplicate
query terms contribute once per occurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

K1_DEFAULT = 1.2
B_DEFAULT = 0.75


@dataclass
class RetrievalIndex:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(chunk_id, tf)]
    doc_len: dict[int, int]
    avg_len: float
    n_docs: int
    chunk_meta: dict[int, tuple[object, int]]  # chunk_id -> (article_id, ordinal)
    k1: float = K1_DEFAULT
    b: float = B_DEFAULT
    term_freqs: dict[int, dict[str, int]] = field(repr=False, default_factory=dict)


def build_index(
    chunks: list[tuple[int, list[str], object]],
    k1: float = K1_DEFAULT,
    b: float = B_DEFAULT,
) -> RetrievalIndex:
    """Index chunks for BM25 scoring.

    ``chunks`` holds ``(chunk_id, tokens, source_article_id)`` entries with
    unique chunk ids.  Raises ``ValueError`` on duplicates or empty input.
    """
    if not chunks:
        raise ValueError("cannot index an empty chunk list")
    doc_len: dict[int, int] = {}
    term_freqs: dict[int, dict[str, int]] = {}
    chunk_meta: dict[int, tuple[object, int]] = {}
    ordinals: dict[object, int] = {}
    for chunk_id, tokens, article_id in chunks:
        if chunk_id in doc_len:
            raise ValueError(f"duplicate chunk id {chunk_id}")
        doc_len[chunk_id] = len(tokens)
        freqs: dict[str, int] = {}
        for t in tokens:
            freqs[t] = freqs.get(t, 0) + 1
        term_freqs[chunk_id] = freqs
        ordinal = ordinals.get(article_id, 0)
        ordinals[article_id] = ordinal + 1
        chunk_meta[chunk_id] = (article_id, ordinal)

    postings: dict[str, list[tuple[int, int]]] = {}
    for chunk_id in sorted(doc_len):
        for term, tf in term_freqs[chunk_id].items():
            postings.setdefault(term, []).append((chunk_id, tf))

    n_docs = len(doc_len)
    return RetrievalIndex(
        postings=postings,
        doc_len=doc_len,
        avg_len=sum(doc_len.values()) / n_docs,
        n_docs=n_docs,
        chunk_meta=chunk_meta,
        k1=k1,
        b=b,
        term_freqs=term_freqs,
    )


def idf(index: RetrievalIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def score(index: RetrievalIndex, query: list[str], chunk_id: int) -> float:
    """BM25 score of one chunk for the query.

    Sums ``idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))``
    over query token occurrences, so a term repeated in the query counts
    once per occurrence.
    """
    if chunk_id not in index.doc_len:
        raise KeyError(f"unknown chunk id {chunk_id}")
    freqs = index.term_freqs[chunk_id]
    norm = index.k1 * (
        1.0 - index.b + index.b * index.doc_len[chunk_id] / index.avg_len
    )
    total = 0.0
    for term in query:
        tf = freqs.get(term, 0)
        if tf == 0:
            continue
        total += idf(index, term) * tf * (index.k1 + 1.0) / (tf + norm)
    return total


def top_k(
    index: RetrievalIndex,
    query: list[str],
    k: int,
    exclude_article: object = None,
) -> list[int]:
    """Chunk ids ranked by descending BM25 score, ties by ascending id.

    Chunks whose source article equals ``exclude_article`` are skipped.
    Returns fewer than ``k`` ids when the corpus is exhausted.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    eligible = [
        cid
        for cid in sorted(index.doc_len)
        if exclude_article is None or index.chunk_meta[cid][0] != exclude_article
    ]
    ranked = sorted(eligible, key=lambda cid: (-score(index, query, cid), cid))
    return ranked[:k]


def dump_index(index: RetrievalIndex, path) -> None:
    """Debug dump: one line per term, ``term<TAB>chunk:tf,chunk:tf,...``."""
    with open(path, "w", encoding="utf-8") as fh:
        for term in sorted(index.postings):
            entries = ",".join(f"{cid}:{tf}" for cid, tf in index.postings[term])
            fh.write(f"{term}\t{entries}\n")
