"""Open-book fact extraction behind a pluggable similarity scorer.

A scorer maps a sentence pair to a relevance score within its declared
range: TF-IDF cosine scores live in [0, 1], STS-style scorers (lexical,
embedding, remote neural) in [0, 5]. Raw scorer ranges are preserved in all
artifacts; normalization to [0, 1] happens only inside the re-ranker.

Also generates the (hypothesis, fact, target) regression pairs used to
fine-tune a trained knowledge-extraction model: the gold fact gets target
5.0 and sampled facts get the similarity between the sample and the gold
fact, stratified into unit-width score buckets so targets stay balanced.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from .corpus_io import EmbeddingTable, FactCorpus, Question
from .errors import ScorerError, StageError
from .hypothesis import Hypothesis, generate_hypotheses
from .text_core import (
    InvertedIndex,
    build_index,
    cosine_sim,
    term_frequency,
    tokenize,
)

log = logging.getLogger(__name__)

STS_RANGE = (0.0, 5.0)
UNIT_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class ScoredFact:
    question_id: str
    option_label: str
    fact_id: int
    text: str
    rel: float

    def to_record(self) -> dict:
        return {"fact_id": self.fact_id, "text": self.text, "rel": self.rel}


@dataclass(frozen=True)
class StsTrainingPair:
    hypothesis_text: str
    fact_text: str
    target: float


class SimilarityScorer:
    """Interface for sentence-pair relevance scoring.

    Implementations must be deterministic for fixed inputs and keep scores
    within ``score_range``.
    """

    name: str = "base"
    score_range: tuple[float, float] = UNIT_RANGE

    def score(self, a: str, b: str) -> float:
        raise NotImplementedError

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(a, b) for a, b in pairs]

    def scores_for_corpus(self, text: str, corpus_texts: Sequence[str]) -> list[float] | None:
        """Optional fast path scoring ``text`` against every corpus entry.

        Returns None when the scorer has no acceleration for this corpus;
        callers then fall back to pairwise scoring.
        """
        return None


class TfidfCosineScorer(SimilarityScorer):
    """Index-backed TF-IDF cosine similarity in [0, 1]."""

    name = "tfidf"
    score_range = UNIT_RANGE

    def __init__(self, corpus_texts: Sequence[str],
                 stopwords: frozenset[str] | None = None):
        self._texts = tuple(corpus_texts)
        self._stopwords = stopwords
        self._index: InvertedIndex = build_index(list(corpus_texts), stopwords=stopwords)

    @property
    def index(self) -> InvertedIndex:
        return self._index

    def score(self, a: str, b: str) -> float:
        return cosine_sim(
            self._index.vectorize(a, stopwords=self._stopwords),
            self._index.vectorize(b, stopwords=self._stopwords),
        )

    def scores_for_corpus(self, text: str, corpus_texts: Sequence[str]) -> list[float] | None:
        if tuple(corpus_texts) != self._texts:
            return None
        q_vec = self._index.vectorize(text, stopwords=self._stopwords)
        q_norm = sum(w * w for w in q_vec.values()) ** 0.5
        scores = [0.0] * len(self._texts)
        if q_norm == 0.0:
            return scores
        for term in sorted(q_vec):
            qw = q_vec[term]
            idf = self._index.idf.get(term)
            if idf is None:
                continue  # out-of-vocabulary: contributes to the norm only
            for doc_id, tf in self._index.postings[term]:
                scores[doc_id] += qw * tf * idf
        for doc_id in range(len(scores)):
            if scores[doc_id]:
                scores[doc_id] = min(scores[doc_id] / (q_norm * self._index.doc_norms[doc_id]), 1.0)
        return scores


class LexicalStsScorer(SimilarityScorer):
    """Corpus-free stand-in for a trained STS model: 5 x term-vector cosine."""

    name = "lexical-sts"
    score_range = STS_RANGE

    def __init__(self, stopwords: frozenset[str] | None = None):
        self._stopwords = stopwords

    def _vec(self, text: str) -> dict[str, float]:
        return term_frequency(
            tokenize(text, remove_stopwords=True, stopwords=self._stopwords)
        )

    def score(self, a: str, b: str) -> float:
        return 5.0 * cosine_sim(self._vec(a), self._vec(b))


class EmbeddingCosineScorer(SimilarityScorer):
    """Cosine over a precomputed embedding table, mapped into [0, 5].

    Negative cosines clamp to 0 so the range contract holds for arbitrary
    vectors. Looking up a text absent from the table is a scorer error that
    names the missing key.
    """

    name = "embedding"
    score_range = STS_RANGE

    def __init__(self, table: EmbeddingTable):
        self._table = table

    def _lookup(self, key: str) -> tuple[float, ...]:
        try:
            return self._table[key]
        except KeyError:
            raise ScorerError(f"no embedding for key: {key!r}") from None

    def score(self, a: str, b: str) -> float:
        va, vb = self._lookup(a), self._lookup(b)
        dot = sum(x * y for x, y in zip(va, vb))
        na = sum(x * x for x in va) ** 0.5
        nb = sum(y * y for y in vb) ** 0.5
        if na == 0.0 or nb == 0.0:
            return 0.0
        return max(0.0, min(dot / (na * nb), 1.0)) * 5.0


class RemoteScorer(SimilarityScorer):
    """Client for the scoring microservice's similarity task.

    Batches are chunked to ``max_batch`` pairs per request; response order
    is the request order, so results concatenate directly.
    """

    name = "remote"
    score_range = STS_RANGE

    def __init__(self, url: str, *, model_id: str = "default",
                 timeout: float = 30.0, max_batch: int = 64):
        self.url = url.rstrip("/")
        self.model_id = model_id
        self.timeout = timeout
        self.max_batch = max_batch

    def _post(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        body = {"task": "similarity", "pairs": [list(p) for p in pairs],
                "model_id": self.model_id}
        try:
            resp = requests.post(f"{self.url}/score", json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerError(f"remote scorer request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerError(
                f"remote scorer returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        scores = resp.json().get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ScorerError("remote scorer response misaligned with request")
        return [float(s) for s in scores]

    def score(self, a: str, b: str) -> float:
        return self._post([(a, b)])[0]

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        out: list[float] = []
        for i in range(0, len(pairs), self.max_batch):
            out.extend(self._post(pairs[i:i + self.max_batch]))
        return out


def retrieve_facts(
    h: Hypothesis, scorer: SimilarityScorer, corpus: FactCorpus, top_n: int
) -> list[ScoredFact]:
    """Exact top-n facts by relevance, descending; ties by ascending fact id.

    Result length is min(top_n, corpus size): zero-relevance facts pad the
    tail in fact-id order when fewer than top_n facts match.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    try:
        scores = scorer.scores_for_corpus(h.text, corpus.texts)
        if scores is None:
            scores = scorer.score_batch([(h.text, text) for text in corpus.texts])
    except ScorerError as exc:
        raise StageError("fact_retrieval", h.question_id, h.option_label, exc) from exc
    order = sorted(range(len(corpus)), key=lambda i: (-scores[i], i))
    return [
        ScoredFact(
            question_id=h.question_id,
            option_label=h.option_label,
            fact_id=i,
            text=corpus[i],
            rel=scores[i],
        )
        for i in order[:top_n]
    ]


_BUCKET_EDGES = (1.0, 2.0, 3.0, 4.0)


def _bucket(score: float) -> int:
    for k, edge in enumerate(_BUCKET_EDGES):
        if score < edge:
            return k
    return 4


def generate_sts_training_pairs(
    questions: Sequence[Question],
    corpus: FactCorpus,
    sts_scorer: SimilarityScorer,
    samples_per_q: int = 8,
    *,
    seed: int = 0,
) -> list[StsTrainingPair]:
    """Regression pairs for training a knowledge-extraction similarity model.

    Per question: one (correct-option hypothesis, gold fact, 5.0) pair plus
    ``samples_per_q`` pairs whose target is the scorer's similarity between
    the sampled fact and the gold fact. Sampling is uniform without
    replacement, stratified round-robin across the five unit-width target
    buckets where possible, and bit-reproducible for a fixed seed.
    """
    if sts_scorer.score_range != STS_RANGE:
        raise ValueError(
            f"sts_scorer must have range {STS_RANGE}, got {sts_scorer.score_range}"
        )
    rng = random.Random(seed)
    pairs: list[StsTrainingPair] = []
    skipped = 0
    for q in questions:
        if not q.gold_fact:
            skipped += 1
            continue
        hyp = next(
            h for h in generate_hypotheses(q) if h.option_label == q.answer_key
        )
        pairs.append(StsTrainingPair(hyp.text, q.gold_fact, 5.0))
        if samples_per_q <= 0:
            continue
        candidates = [t for t in corpus.texts if t != q.gold_fact]
        targets = sts_scorer.score_batch([(t, q.gold_fact) for t in candidates])
        buckets: list[list[int]] = [[] for _ in range(5)]
        for idx, target in enumerate(targets):
            buckets[_bucket(target)].append(idx)
        drawn: list[int] = []
        while len(drawn) < min(samples_per_q, len(candidates)):
            progressed = False
            for bucket in buckets:
                if bucket and len(drawn) < samples_per_q:
                    drawn.append(bucket.pop(rng.randrange(len(bucket))))
                    progressed = True
            if not progressed:
                break
        for idx in drawn:
            pairs.append(StsTrainingPair(hyp.text, candidates[idx], targets[idx]))
    if skipped:
        log.warning("generate_sts_training_pairs: skipped %d questions without gold_fact", skipped)
    return pairs


def save_sts_pairs(pairs: Iterable[StsTrainingPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.hypothesis_text}\t{p.fact_text}\t{p.target!r}\n")
