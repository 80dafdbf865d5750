"""Deterministic synthetic corpora for desk-scale runs.

Real news corpora and search logs are out of scope, so demos and tests build
triplets from generated articles and IR-log-style records instead.  The
generators draw from a small closed word pool (well under 200 distinct
tokens) so vocabularies stay tiny, and they plant verbatim sentence reuse
between paragraphs and summaries so retrieval, alignment, and coverage
filters all have signal to find.
"""

from __future__ import annotations

import numpy as np

from .data import Article, IrRecord

TOPICS = [
    ("storm", "coast", "flood", "wind", "rain", "shelter"),
    ("league", "match", "goal", "coach", "striker", "title"),
    ("market", "shares", "bank", "profit", "trade", "index"),
    ("probe", "orbit", "lander", "crater", "signal", "rover"),
    ("virus", "clinic", "vaccine", "nurse", "ward", "trial"),
    ("drought", "harvest", "grain", "farmer", "field", "price"),
    ("summit", "treaty", "border", "minister", "talks", "accord"),
    ("wildfire", "ridge", "crew", "smoke", "evacuation", "forest"),
]

FILLER = (
    "the of a in on at for with after before over under near from "
    "officials residents reports sources early late local national major "
    "new old first second third last large small long short high low"
).split()

VERBS = (
    "said warned announced confirmed reached moved closed opened "
    "rose fell began ended continued returned"
).split()

MARKERS = (
    "alpha beta gamma delta epsilon zeta eta theta iota kappa "
    "lamda mu nu xi omicron pi rho sigma tau upsilon"
).split()


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, *key])


def _sentence(rng, topic, n_words) -> str:
    words = [MARKERS[rng.integers(len(MARKERS))]] if rng.random() < 0.3 else []
    words.append(str(topic[rng.integers(len(topic))]))
    while len(words) < n_words:
        pool = topic if rng.random() < 0.4 else FILLER
        words.append(str(pool[rng.integers(len(pool))]))
    words.insert(1 + rng.integers(len(words) - 1), VERBS[rng.integers(len(VERBS))])
    return " ".join(words) + " ."


def _paragraph(rng, topic) -> str:
    return " ".join(_sentence(rng, topic, int(rng.integers(5, 11))) for _ in range(int(rng.integers(1, 4))))


def make_articles(
    n: int, seed: int = 0, min_paragraphs: int = 5, max_paragraphs: int = 12
) -> list[Article]:
    """Generate ``n`` articles over a rotating set of topics.

    Summary sentences are copied verbatim from distinct paragraphs so that
    after chunking, summaries genuinely span multiple documents.
    """
    articles = []
    for i in range(n):
        rng = _rng(seed, 1, i)
        topic = TOPICS[i % len(TOPICS)]
        marker = MARKERS[i % len(MARKERS)]
        title = f"{marker} {topic[0]} {topic[1]} {VERBS[int(rng.integers(len(VERBS)))]}"
        paragraphs = [
            _paragraph(rng, topic)
            for _ in range(int(rng.integers(min_paragraphs, max_paragraphs + 1)))
        ]
        picks = rng.choice(len(paragraphs), size=min(3, len(paragraphs)), replace=False)
        summary_sents = []
        for p in sorted(int(x) for x in picks):
            first = paragraphs[p].split(" .")[0].strip()
            summary_sents.append(first + " .")
        articles.append(Article(f"art-{i:04d}", title, paragraphs, " ".join(summary_sents)))
    return articles


def make_ir_records(n: int, seed: int = 0, defect_rate: float = 0.25) -> list[IrRecord]:
    """Generate IR-log records; a ``defect_rate`` fraction deliberately fail
    one of the filter criteria (short answer, too few documents, or an
    uncovered answer sentence)."""
    records = []
    for i in range(n):
        rng = _rng(seed, 2, i)
        topic = TOPICS[i % len(TOPICS)]
        query = " ".join(
            [MARKERS[i % len(MARKERS)]]
            + [str(topic[int(j)]) for j in rng.choice(len(topic), size=2, replace=False)]
        )
        answer_sents = [_sentence(rng, topic, int(rng.integers(6, 10))) for _ in range(int(rng.integers(2, 4)))]
        n_docs = int(rng.integers(4, 7))
        docs = [_paragraph(rng, topic) for _ in range(n_docs)]
        source = int(rng.integers(n_docs))
        # Cover every answer sentence with some non-source document.
        for s in answer_sents:
            slot = int(rng.integers(n_docs))
            while slot == source:
                slot = int(rng.integers(n_docs))
            docs[slot] = docs[slot] + " " + s
        defect = rng.random() < defect_rate
        if defect:
            kind = int(rng.integers(3))
            if kind == 0:
                answer_sents = answer_sents[:1]
            elif kind == 1:
                docs = docs[: source + 1][-3:]
                source = len(docs) - 1
            else:
                answer_sents.append("quasar jukebox fjord puzzle .")
        records.append(IrRecord(query, " ".join(answer_sents), docs, source))
    return records
