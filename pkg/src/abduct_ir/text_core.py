"""Deterministic tokenization, sparse-vector math, and a TF-IDF/BM25 index.

Everything downstream (hypothesis token sets, abduced queries, retrieval,
re-ranking similarity) is built on the primitives in this module, so the
contract here is strict determinism: no randomness, no locale dependence,
stable tie-breaking by ascending doc id.

Scoring modes of :class:`InvertedIndex`:

* ``tfidf-cosine`` -- document and query vectors weighted tf * idf with
  idf = ln((N+1)/(df+1)) + 1, scored by cosine; scores fall in [0, 1].
* ``bm25`` -- Okapi BM25 with the same (non-negative) idf table,
  defaults k1=1.2, b=0.75.
"""

from __future__ import annotations

import math
import pickle
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError

# Alnum runs, keeping intra-word hyphens ("red-tailed" stays one token).
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:-[A-Za-z0-9]+)*")

_STOPWORDS_CACHE: frozenset[str] | None = None

TFIDF_COSINE = "tfidf-cosine"
BM25 = "bm25"

SparseVector = dict[str, float]


def default_stopwords() -> frozenset[str]:
    """The stopword list shipped with the package (standard English, ~150 words)."""
    global _STOPWORDS_CACHE
    if _STOPWORDS_CACHE is None:
        text = resources.files("abduct_ir.assets").joinpath("stopwords.txt").read_text("utf-8")
        _STOPWORDS_CACHE = frozenset(w for w in text.split() if w)
    return _STOPWORDS_CACHE


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a one-word-per-line stopword file (lowercased on load)."""
    words = Path(path).read_text(encoding="utf-8").split()
    if not words:
        raise DataError(f"stopword file {path} is empty")
    return frozenset(w.lower() for w in words)


def _strip_suffix(token: str) -> str:
    # Minimal plural stripping (Porter step 1a), off by default.
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ies"):
        return token[:-2]
    if token.endswith("ss"):
        return token
    if token.endswith("s") and len(token) > 3:
        return token[:-1]
    return token


def tokenize(
    text: str,
    *,
    lowercase: bool = True,
    remove_stopwords: bool = False,
    strip_suffixes: bool = False,
    stopwords: frozenset[str] | None = None,
) -> list[str]:
    """Split ``text`` on non-alphanumeric boundaries, keeping intra-word hyphens.

    Deterministic; empty input yields an empty list. Stopword matching is
    case-insensitive against the (lowercase) list regardless of ``lowercase``.
    """
    tokens = _TOKEN_RE.findall(text)
    if lowercase:
        tokens = [t.lower() for t in tokens]
    if strip_suffixes:
        tokens = [_strip_suffix(t) for t in tokens]
    if remove_stopwords:
        stop = default_stopwords() if stopwords is None else stopwords
        tokens = [t for t in tokens if t.lower() not in stop]
    return tokens


@dataclass(frozen=True)
class TokenSet:
    """Unique tokens in first-occurrence order.

    Set semantics for membership and algebra, plus a stable ordering so that
    queries built from set operations are reproducible. Binary operations
    keep left-operand tokens in left order followed by right-only tokens in
    right order.
    """

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if any(not t for t in self.tokens):
            raise ValueError("TokenSet cannot contain empty tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("TokenSet cannot contain duplicates")

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> TokenSet:
        return cls(tuple(dict.fromkeys(tokens)))

    @classmethod
    def from_text(cls, text: str, *, remove_stopwords: bool = True,
                  stopwords: frozenset[str] | None = None) -> TokenSet:
        return cls.from_tokens(
            tokenize(text, remove_stopwords=remove_stopwords, stopwords=stopwords)
        )

    def __contains__(self, token: str) -> bool:
        return token in set(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)

    def as_set(self) -> frozenset[str]:
        return frozenset(self.tokens)

    def union(self, other: TokenSet) -> TokenSet:
        mine = set(self.tokens)
        return TokenSet(self.tokens + tuple(t for t in other.tokens if t not in mine))

    def intersection(self, other: TokenSet) -> TokenSet:
        theirs = set(other.tokens)
        return TokenSet(tuple(t for t in self.tokens if t in theirs))

    def difference(self, other: TokenSet) -> TokenSet:
        theirs = set(other.tokens)
        return TokenSet(tuple(t for t in self.tokens if t not in theirs))

    def symmetric_difference(self, other: TokenSet) -> TokenSet:
        return self.difference(other).union(other.difference(self))


def term_frequency(tokens: Iterable[str]) -> SparseVector:
    """Raw term-count vector; no zero entries by construction."""
    return dict(Counter(tokens))


def cosine_sim(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity of two non-negative sparse vectors, in [0, 1].

    Returns 0.0 when either vector is empty (or has zero norm).
    """
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0  # exact self-similarity, immune to sqrt rounding
    if len(b) < len(a):
        a, b = b, a
    dot = sum(w * b[t] for t, w in a.items() if t in b)
    if dot == 0.0:
        return 0.0
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return min(dot / (norm_a * norm_b), 1.0)


@dataclass
class InvertedIndex:
    """Immutable-after-build inverted index over a tokenized corpus.

    Postings are sorted by doc id; ``idf[t] = ln((N+1)/(df+1)) + 1`` is
    shared by both scoring modes, so it is always >= 1 > 0.
    """

    mode: str
    k1: float
    b: float
    n_docs: int
    postings: dict[str, list[tuple[int, int]]]
    idf: dict[str, float]
    doc_lengths: list[int]
    avgdl: float
    doc_norms: list[float] = field(repr=False)

    FORMAT_HEADER = b"ABDUCTIR-INDEX v1\n"

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf_of(self, term: str) -> float:
        """idf under the index formula; out-of-vocabulary terms get df = 0."""
        got = self.idf.get(term)
        if got is not None:
            return got
        return math.log((self.n_docs + 1) / 1.0) + 1.0

    def vectorize(self, text: str, *, stopwords: frozenset[str] | None = None) -> SparseVector:
        """tf * idf vector of arbitrary text under this index's idf table."""
        tokens = tokenize(text, remove_stopwords=True, stopwords=stopwords)
        return {t: tf * self.idf_of(t) for t, tf in term_frequency(tokens).items()}

    def score_all(self, query_tokens: Iterable[str]) -> dict[int, float]:
        """Scores for every document with at least one matching term.

        Terms are accumulated in sorted order so float summation is
        reproducible across runs.
        """
        counts = term_frequency(query_tokens)
        known = {t: c for t, c in counts.items() if t in self.postings}
        if not known:
            return {}
        scores: dict[int, float] = {}
        if self.mode == TFIDF_COSINE:
            q_weights = {t: c * self.idf[t] for t, c in known.items()}
            q_norm = math.sqrt(sum(w * w for w in q_weights.values()))
            for term in sorted(q_weights):
                qw = q_weights[term]
                idf = self.idf[term]
                for doc_id, tf in self.postings[term]:
                    scores[doc_id] = scores.get(doc_id, 0.0) + qw * tf * idf
            for doc_id in scores:
                scores[doc_id] /= q_norm * self.doc_norms[doc_id]
        elif self.mode == BM25:
            for term in sorted(known):
                qtf = known[term]
                idf = self.idf[term]
                for doc_id, tf in self.postings[term]:
                    dl = self.doc_lengths[doc_id]
                    denom = tf + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
                    scores[doc_id] = scores.get(doc_id, 0.0) + qtf * idf * tf * (self.k1 + 1.0) / denom
        else:
            raise ValueError(f"unknown scoring mode {self.mode!r}")
        return {d: s for d, s in scores.items() if s > 0.0}


def build_index(
    corpus: list[str],
    mode: str = TFIDF_COSINE,
    *,
    k1: float = 1.2,
    b: float = 0.75,
    stopwords: frozenset[str] | None = None,
) -> InvertedIndex:
    """Index a corpus of raw sentences (tokenized with stopwords removed)."""
    if not corpus:
        raise DataError("cannot build an index over an empty corpus")
    if mode not in (TFIDF_COSINE, BM25):
        raise ValueError(f"unknown scoring mode {mode!r}")

    n = len(corpus)
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_tfs: list[dict[str, int]] = []
    for doc_id, text in enumerate(corpus):
        tokens = tokenize(text, remove_stopwords=True, stopwords=stopwords)
        tf = term_frequency(tokens)
        doc_tfs.append(tf)
        doc_lengths.append(len(tokens))
        for term in tf:
            postings.setdefault(term, [])

    for term in postings:
        plist = []
        for doc_id, tf in enumerate(doc_tfs):
            if term in tf:
                plist.append((doc_id, int(tf[term])))
        postings[term] = plist  # built in doc order, hence sorted by doc id

    idf = {t: math.log((n + 1) / (len(p) + 1)) + 1.0 for t, p in postings.items()}
    avgdl = sum(doc_lengths) / n
    doc_norms = []
    for tf in doc_tfs:
        doc_norms.append(math.sqrt(sum((c * idf[t]) ** 2 for t, c in tf.items())) or 1.0)

    return InvertedIndex(
        mode=mode, k1=k1, b=b, n_docs=n, postings=postings, idf=idf,
        doc_lengths=doc_lengths, avgdl=avgdl, doc_norms=doc_norms,
    )


def query_index(
    index: InvertedIndex, query_tokens: Iterable[str], top_n: int
) -> list[tuple[int, float]]:
    """Exact top-n (doc_id, score) pairs, descending score, ties by doc id.

    Documents with zero score are never returned, so an all-out-of-vocabulary
    query yields an empty result.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    scores = index.score_all(query_tokens)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_n]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist an index as a binary cache with a format-version header."""
    payload = {
        "mode": index.mode, "k1": index.k1, "b": index.b, "n_docs": index.n_docs,
        "postings": index.postings, "idf": index.idf,
        "doc_lengths": index.doc_lengths, "avgdl": index.avgdl,
        "doc_norms": index.doc_norms,
    }
    with open(path, "wb") as fh:
        fh.write(InvertedIndex.FORMAT_HEADER)
        pickle.dump(payload, fh, protocol=4)


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as fh:
        header = fh.read(len(InvertedIndex.FORMAT_HEADER))
        if header != InvertedIndex.FORMAT_HEADER:
            raise DataError(f"{path}: not an index cache (bad format header)")
        payload = pickle.load(fh)
    return InvertedIndex(**payload)
