"""Missing-knowledge retrieval and information-gain re-ranking.

Retrieval pulls a pool of candidate sentences for each abduced query from
the common-knowledge index, then re-scores each candidate against the
hypothesis with the configured similarity scorer: that score is the
relevance, rel. Re-ranking greedily selects candidates balancing relevance
against a running redundancy score:

    red_i(K_j)  = max(red_{i-1}(K_j), sim(K_i, K_j))     (K_i = last pick)
    rank_score  = (1 - red_i(K_j)) * rel(K_j) / rel_max

The first pick is the highest-rel candidate; every later iteration updates
each remaining candidate's redundancy against the last selected sentence and
picks the best rank_score. rel is normalized by the producing scorer's range
maximum so a [0, 5] scorer cannot drown out the [0, 1] redundancy term;
ordering within one scorer is unaffected. Because the recurrence keeps a
running max, redundancy-vs-last equals redundancy-vs-all-selected; both
forms are implemented and the recurrence is canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .abduction import AbducedQuery
from .corpus_io import EmbeddingTable, KnowledgeCorpus
from .errors import ScorerError, StageError
from .fact_retrieval import SimilarityScorer
from .text_core import InvertedIndex, cosine_sim, query_index

SimFn = Callable[[str, str], float]


@dataclass
class KnowledgeItem:
    question_id: str
    option_label: str
    sent_id: int
    text: str
    rel: float
    red: float = 0.0
    rank_score: float = 0.0

    def to_record(self) -> dict:
        return {
            "sent_id": self.sent_id,
            "text": self.text,
            "rel": self.rel,
            "red": self.red,
            "rank_score": self.rank_score,
        }


def tfidf_sim(index: InvertedIndex, *, stopwords: frozenset[str] | None = None) -> SimFn:
    """Symmetric TF-IDF cosine between sentences under the given index's idf."""

    def sim(a: str, b: str) -> float:
        return cosine_sim(
            index.vectorize(a, stopwords=stopwords),
            index.vectorize(b, stopwords=stopwords),
        )

    return sim


def embedding_sim(table: EmbeddingTable) -> SimFn:
    """Embedding cosine clamped into [0, 1]; raises ScorerError on missing keys."""

    def sim(a: str, b: str) -> float:
        try:
            va, vb = table[a], table[b]
        except KeyError as exc:
            raise ScorerError(f"no embedding for key: {exc.args[0]!r}") from None
        dot = sum(x * y for x, y in zip(va, vb))
        na = sum(x * x for x in va) ** 0.5
        nb = sum(y * y for y in vb) ** 0.5
        if na == 0.0 or nb == 0.0:
            return 0.0
        return max(0.0, min(dot / (na * nb), 1.0))

    return sim


def retrieve_candidates(
    query: AbducedQuery,
    index: InvertedIndex,
    corpus: KnowledgeCorpus,
    pool_m: int,
    *,
    scorer: SimilarityScorer | None = None,
    hypothesis_text: str | None = None,
) -> list[KnowledgeItem]:
    """Top pool_m sentences by index score, re-scored to rel, redundancy 0.

    When ``scorer`` (and the hypothesis text) is given, rel is the scorer's
    similarity between the hypothesis and the candidate, mirroring the
    knowledge-extraction model's role as the initial ranker; otherwise the
    raw IR score is kept as rel. An empty query yields an empty pool.
    """
    if pool_m < 1:
        raise ValueError(f"pool_m must be >= 1, got {pool_m}")
    if not query.tokens:
        return []
    hits = query_index(index, list(query.tokens), pool_m)
    if scorer is not None:
        if hypothesis_text is None:
            raise ValueError("hypothesis_text is required when re-scoring with a scorer")
        try:
            rels = scorer.score_batch([(hypothesis_text, corpus[sid]) for sid, _ in hits])
        except ScorerError as exc:
            raise StageError(
                "missing_knowledge", query.question_id, query.option_label, exc
            ) from exc
    else:
        rels = [score for _, score in hits]
    items = [
        KnowledgeItem(
            question_id=query.question_id,
            option_label=query.option_label,
            sent_id=sid,
            text=corpus[sid],
            rel=rel,
        )
        for (sid, _), rel in zip(hits, rels)
    ]
    items.sort(key=lambda it: (-it.rel, it.sent_id))
    return items


def information_gain_rerank(
    pool: Sequence[KnowledgeItem],
    sim_fn: SimFn,
    top_k: int,
    *,
    rel_range_max: float = 1.0,
    redundancy: str = "recurrence",
) -> list[KnowledgeItem]:
    """Greedy redundancy-penalized selection of min(top_k, |pool|) items.

    Returns fresh items carrying the red and rank_score they had at the
    moment of selection. ``redundancy`` picks the update rule: "recurrence"
    (running max against the last selection) or "max_all" (recomputed max
    over every selection); the two are equivalent and tested as such.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if rel_range_max <= 0:
        raise ValueError(f"rel_range_max must be positive, got {rel_range_max}")
    if redundancy not in ("recurrence", "max_all"):
        raise ValueError(f"unknown redundancy form {redundancy!r}")
    if not pool:
        return []

    remaining = list(pool)
    red = {it.sent_id: 0.0 for it in remaining}
    rel_norm = {it.sent_id: it.rel / rel_range_max for it in remaining}

    # First pick: highest raw relevance, ties to the lowest sent_id.
    first = min(remaining, key=lambda it: (-it.rel, it.sent_id))
    remaining.remove(first)
    selected = [replace(first, red=0.0, rank_score=rel_norm[first.sent_id])]

    while remaining and len(selected) < top_k:
        last = selected[-1]
        for it in remaining:
            if redundancy == "recurrence":
                red[it.sent_id] = max(red[it.sent_id], sim_fn(last.text, it.text))
            else:
                red[it.sent_id] = max(sim_fn(s.text, it.text) for s in selected)

        def rank(it: KnowledgeItem) -> float:
            return (1.0 - red[it.sent_id]) * rel_norm[it.sent_id]

        best = min(remaining, key=lambda it: (-rank(it), it.sent_id))
        remaining.remove(best)
        selected.append(replace(best, red=red[best.sent_id], rank_score=rank(best)))
    return selected
