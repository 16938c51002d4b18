"""Abduce the missing-knowledge IR query from a hypothesis / fact pair.

Four models over the stopword-free token sets H (hypothesis) and F
(retrieved fact):

* ``symmdiff`` -- K = (H | F) - (H & F), the heuristic that performs best
  downstream: words the hypothesis and the fact do not share are exactly
  what still needs support.
* ``union``    -- K = H | F, the baseline.
* ``bow``      -- keep words whose learned probability of belonging to the
  missing knowledge exceeds a threshold (default 0.4).
* ``generated``-- consume externally generated candidate sentences and keep
  the one with maximum overlap_score against the gold missing knowledge
  (stopwords retained for this model).

Query token ordering is fixed for reproducibility: hypothesis-side tokens in
hypothesis order, then fact-only tokens in fact order.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus_io import EmbeddingTable, Question
from .errors import DataError, StageError
from .fact_retrieval import ScoredFact
from .hypothesis import Hypothesis
from .text_core import TokenSet, tokenize

MODELS = ("symmdiff", "union", "bow", "generated")


@dataclass(frozen=True)
class AbducedQuery:
    question_id: str
    option_label: str
    model: str
    tokens: TokenSet
    query_text: str

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "option_label": self.option_label,
            "model": self.model,
            "tokens": list(self.tokens),
            "query_text": self.query_text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AbducedQuery":
        return cls(
            question_id=rec["question_id"],
            option_label=rec["option_label"],
            model=rec["model"],
            tokens=TokenSet.from_tokens(rec["tokens"]),
            query_text=rec["query_text"],
        )


class WordProbProvider:
    """P(word belongs to the missing knowledge | context words)."""

    def prob(self, word: str, context: Counter) -> float:
        raise NotImplementedError


class ConstantProbProvider(WordProbProvider):
    def __init__(self, p: float):
        self.p = p

    def prob(self, word: str, context: Counter) -> float:
        return self.p


class TableProbProvider(WordProbProvider):
    """Word probabilities from a precomputed table (word TAB prob per line)."""

    def __init__(self, table: Mapping[str, float], default: float = 0.0):
        self.table = dict(table)
        self.default = default

    @classmethod
    def from_file(cls, path: str | Path, default: float = 0.0) -> "TableProbProvider":
        table: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    word, prob = line.split("\t")
                    table[word] = float(prob)
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: expected 'word TAB prob'") from exc
        return cls(table, default=default)

    def prob(self, word: str, context: Counter) -> float:
        return self.table.get(word, self.default)


@dataclass(frozen=True)
class BowTrainingExample:
    word: str
    context_tokens: tuple[str, ...]
    label: str  # "positive" | "negative"


def _query(model: str, tokens: TokenSet, question_id: str, option_label: str) -> AbducedQuery:
    return AbducedQuery(
        question_id=question_id,
        option_label=option_label,
        model=model,
        tokens=tokens,
        query_text=" ".join(tokens),
    )


def symmetric_difference_query(
    H: TokenSet, F: TokenSet, *, question_id: str = "", option_label: str = ""
) -> AbducedQuery:
    """K = (H | F) - (H & F): drop words the hypothesis and fact agree on."""
    return _query("symmdiff", H.symmetric_difference(F), question_id, option_label)


def word_union_query(
    H: TokenSet, F: TokenSet, *, question_id: str = "", option_label: str = ""
) -> AbducedQuery:
    """Baseline K = H | F: every candidate word from both sides."""
    return _query("union", H.union(F), question_id, option_label)


def bag_of_words_query(
    H: TokenSet,
    F: TokenSet,
    provider: WordProbProvider,
    theta: float = 0.4,
    *,
    question_id: str = "",
    option_label: str = "",
) -> AbducedQuery:
    """Keep words of H | F whose provider probability exceeds ``theta``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1], got {theta}")
    context = Counter(H.tokens) + Counter(F.tokens)
    union = H.union(F)
    kept = []
    for w in union:
        try:
            p = provider.prob(w, context)
        except Exception as exc:
            raise StageError("abduction", question_id, option_label, exc) from exc
        if p > theta:
            kept.append(w)
    return _query("bow", TokenSet.from_tokens(kept), question_id, option_label)


def overlap_scores(
    candidates: Sequence[str], H: TokenSet, F: TokenSet, gold: TokenSet
) -> list[float]:
    """Per-candidate overlap_score = |(H | F) & tokens(candidate)| / |gold|.

    Candidates are tokenized with stopwords retained.
    """
    if not candidates:
        raise ValueError("candidates must be nonempty")
    if len(gold) == 0:
        raise DataError("gold missing-knowledge token set is empty (overlap undefined)")
    hf = H.union(F).as_set()
    scores = []
    for cand in candidates:
        cand_tokens = set(tokenize(cand))
        scores.append(len(hf & cand_tokens) / len(gold))
    return scores


def select_generated_knowledge(
    candidates: Sequence[str], H: TokenSet, F: TokenSet, gold: TokenSet
) -> str:
    """The candidate sentence with maximum overlap_score; ties keep the first."""
    scores = overlap_scores(candidates, H, F, gold)
    best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
    return candidates[best]


def aggregate_overlap_score(
    numerators: Iterable[int], denominators: Iterable[int]
) -> float:
    """Corpus-level overlap: sum of overlaps / sum of gold sizes (reporting only)."""
    num = sum(numerators)
    den = sum(denominators)
    if den == 0:
        raise DataError("aggregate overlap undefined: no gold tokens")
    return num / den


def build_bow_training_data(
    questions: Sequence[Question],
    hypotheses: Sequence[Hypothesis],
    facts: Sequence[ScoredFact],
    wordvec: EmbeddingTable,
    sim_threshold: float = 0.6,
    *,
    seed: int = 0,
) -> list[BowTrainingExample]:
    """Label words of H | F against the gold missing knowledge.

    A word is positive when it appears verbatim in the gold tokens or its
    embedding cosine to some gold token reaches ``sim_threshold`` (words
    without an embedding are negative by definition). The emitted dataset is
    balanced exactly 1:1 by downsampling the larger class with a seeded RNG.
    """
    gold_by_q = {
        q.id: q.gold_missing_knowledge
        for q in questions
        if q.gold_missing_knowledge is not None
    }
    if not any(gold_by_q.values()):
        raise DataError("no question carries gold missing knowledge")

    hyp_by_key = {(h.question_id, h.option_label): h for h in hypotheses}
    facts_by_key: dict[tuple[str, str], list[ScoredFact]] = {}
    for f in facts:
        facts_by_key.setdefault((f.question_id, f.option_label), []).append(f)

    def emb_cos(a: str, b: str) -> float:
        if a not in wordvec or b not in wordvec:
            return 0.0
        va, vb = wordvec[a], wordvec[b]
        dot = sum(x * y for x, y in zip(va, vb))
        na = sum(x * x for x in va) ** 0.5
        nb = sum(y * y for y in vb) ** 0.5
        return dot / (na * nb) if na and nb else 0.0

    positives: list[BowTrainingExample] = []
    negatives: list[BowTrainingExample] = []
    for (qid, label), hyp in hyp_by_key.items():
        gold = gold_by_q.get(qid)
        if not gold:
            continue
        gold_tokens = TokenSet.from_tokens(
            t for g in gold for t in tokenize(g, remove_stopwords=True)
        )
        f_tokens = TokenSet.from_tokens(
            t
            for f in facts_by_key.get((qid, label), [])
            for t in tokenize(f.text, remove_stopwords=True)
        )
        context = hyp.token_set.union(f_tokens)
        for w in context:
            is_pos = w in gold_tokens or any(
                emb_cos(w, g) >= sim_threshold for g in gold_tokens
            )
            ex = BowTrainingExample(word=w, context_tokens=context.tokens,
                                    label="positive" if is_pos else "negative")
            (positives if is_pos else negatives).append(ex)

    rng = random.Random(seed)
    n = min(len(positives), len(negatives))
    for pool in (positives, negatives):
        while len(pool) > n:
            pool.pop(rng.randrange(len(pool)))
    merged = positives + negatives
    return merged


def save_bow_training_data(
    examples: Iterable[BowTrainingExample], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{ex.word}\t{ex.label}\t{' '.join(ex.context_tokens)}\n")
