"""Sentence encoders behind the scoring service.

Two backends:

* ``hash`` -- a deterministic hashed-feature encoder (word unigrams plus
  character 3..5-grams, md5-bucketed, log-weighted, L2-normalized). No model
  weights, fully reproducible, robust to inflectional variation; cosines of
  its non-negative vectors land in [0, 1], so the similarity head is
  calibrated to the [0, 5] scale with sim(x, x) = 5.0 exactly.
* ``st`` -- any sentence-transformers model, when one is installed and its
  weights are available locally.

``auto`` tries ``st`` and falls back to ``hash``.
"""

from __future__ import annotations

import hashlib
import math
import re
from typing import Protocol, Sequence

import numpy as np

DEFAULT_DIM = 512
DEFAULT_ST_MODEL = "sentence-transformers/all-MiniLM-L6-v2"

_WORD_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


class Encoder(Protocol):
    model_id: str

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """L2-normalized row vectors, one per input text."""


def _bucket(feature: str, dim: int) -> int:
    digest = hashlib.md5(feature.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


class HashedNgramEncoder:
    """Deterministic lexical encoder: hashed word + character n-gram counts."""

    def __init__(self, dim: int = DEFAULT_DIM, ngram_range: tuple[int, int] = (3, 5)):
        if dim < 8:
            raise ValueError(f"dim must be >= 8, got {dim}")
        self.dim = dim
        self.ngram_range = ngram_range
        self.model_id = f"hashed-ngram-{dim}"
        self._word_slot_cache: dict[str, tuple[int, ...]] = {}

    def _word_slots(self, word: str) -> tuple[int, ...]:
        slots = self._word_slot_cache.get(word)
        if slots is None:
            slots = tuple(_bucket(f, self.dim) for f in self._word_features(word))
            self._word_slot_cache[word] = slots
        return slots

    def _features(self, text: str) -> dict[int, float]:
        counts: dict[int, float] = {}
        for word in _WORD_RE.findall(text.lower()):
            for slot in self._word_slots(word):
                counts[slot] = counts.get(slot, 0.0) + 1.0
        return counts

    def _word_features(self, word: str):
        yield "w:" + word
        padded = f"^{word}$"
        lo, hi = self.ngram_range
        for n in range(lo, hi + 1):
            if len(padded) < n:
                break
            for i in range(len(padded) - n + 1):
                yield "g:" + padded[i:i + n]

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for slot, count in self._features(text).items():
                out[row, slot] = math.log1p(count)
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class SentenceTransformerEncoder:
    """Wrapper over a sentence-transformers model (weights must be local)."""

    def __init__(self, model_name: str = DEFAULT_ST_MODEL):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self.model_id = model_name

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            dim = self._model.get_sentence_embedding_dimension()
            return np.zeros((0, dim), dtype=np.float64)
        return np.asarray(
            self._model.encode(list(texts), normalize_embeddings=True),
            dtype=np.float64,
        )


def get_encoder(backend: str = "hash", *, dim: int = DEFAULT_DIM,
                model_name: str = DEFAULT_ST_MODEL) -> Encoder:
    if backend == "hash":
        return HashedNgramEncoder(dim=dim)
    if backend == "st":
        return SentenceTransformerEncoder(model_name)
    if backend == "auto":
        try:
            return SentenceTransformerEncoder(model_name)
        except Exception:
            return HashedNgramEncoder(dim=dim)
    raise ValueError(f"unknown encoder backend {backend!r}")


def similarity_scores(encoder: Encoder, pairs: Sequence[tuple[str, str]]) -> list[float]:
    """STS-scale scores in [0, 5]: 5 x clamped cosine of the pair encodings.

    Identical texts score exactly 5.0 (no unit-norm rounding residue).
    """
    if not pairs:
        return []
    lefts = encoder.encode([a for a, _ in pairs])
    rights = encoder.encode([b for _, b in pairs])
    cosines = np.sum(lefts * rights, axis=1)
    return [
        5.0 if a == b and np.any(lefts[i]) else 5.0 * float(min(max(c, 0.0), 1.0))
        for i, ((a, b), c) in enumerate(zip(pairs, cosines))
    ]


def answer_scores(
    encoder: Encoder, triples: Sequence[tuple[str, str, str]]
) -> list[float]:
    """Answer-task scores in [0, 1]: clamped cosine between the passage and
    the question-plus-option encoding."""
    if not triples:
        return []
    passages = encoder.encode([p for p, _, _ in triples])
    targets = encoder.encode([f"{q} {o}" for _, q, o in triples])
    cosines = np.sum(passages * targets, axis=1)
    return [float(min(max(c, 0.0), 1.0)) for c in cosines]
