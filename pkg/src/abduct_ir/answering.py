"""Per-option passage assembly, score-matrix aggregation, and answer choice.

Each answer option gets its own passage (selected facts first, then selected
missing knowledge, whole sentences only, capped at a token budget). An
answer scorer produces the 4x4 matrix score(P_j, Q, A_i); aggregation then
follows three rules:

* sum score          Pr(Q, A_i)       = sum_j score(P_j, Q, A_i)
* passage selection  delta_j = 1 for the top-two facts-round sums, else 0
* weighted scoring   wPr(Q, A_i)      = Pr(F, Q, A_i) * Pr(F|K, Q, A_i)
                     with the second round delta-gated.

Ties anywhere resolve to the lowest option index for reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import requests

from .corpus_io import OPTION_LABELS
from .errors import ScorerError
from .fact_retrieval import ScoredFact
from .missing_knowledge import KnowledgeItem
from .text_core import tokenize

DEFAULT_MAX_TOKENS = 512


@dataclass(frozen=True)
class Passage:
    question_id: str
    option_label: str
    text: str
    token_count: int
    max_tokens: int = DEFAULT_MAX_TOKENS


@dataclass(frozen=True)
class Prediction:
    question_id: str
    chosen_label: str
    sum_scores: tuple[float, float, float, float]
    selected_mask: tuple[int, int, int, int]
    weighted_scores: tuple[float, float, float, float]

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "chosen_label": self.chosen_label,
            "sum_scores": list(self.sum_scores),
            "selected_mask": list(self.selected_mask),
            "weighted_scores": list(self.weighted_scores),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Prediction":
        return cls(
            question_id=rec["question_id"],
            chosen_label=rec["chosen_label"],
            sum_scores=tuple(rec["sum_scores"]),
            selected_mask=tuple(rec["selected_mask"]),
            weighted_scores=tuple(rec["weighted_scores"]),
        )


class ScoreMatrix:
    """4x4 matrix of finite, non-negative scores; entry (j, i) = score(P_j, Q, A_i)."""

    def __init__(self, rows: Sequence[Sequence[float]]):
        if len(rows) != 4 or any(len(r) != 4 for r in rows):
            raise ValueError("score matrix must be 4x4")
        for r in rows:
            for v in r:
                if not math.isfinite(v) or v < 0:
                    raise ValueError(f"score matrix entries must be finite and >= 0, got {v}")
        self.rows = [list(r) for r in rows]

    def entry(self, j: int, i: int) -> float:
        return self.rows[j][i]


class AnswerScorer:
    """score(passage, question, option_text) -> float >= 0, deterministic."""

    name: str = "base"

    def score(self, passage: str, question: str, option_text: str) -> float:
        raise NotImplementedError


def lexical_answer_scorer(
    passage: str, question: str, option_text: str,
    stopwords: frozenset[str] | None = None,
) -> float:
    """Normalized token overlap in [0, 1], stopwords removed.

    |tokens(option + question) & tokens(passage)| / |tokens(option + question)|
    """
    target = set(tokenize(option_text + " " + question, remove_stopwords=True,
                          stopwords=stopwords))
    if not target:
        return 0.0
    found = set(tokenize(passage, remove_stopwords=True, stopwords=stopwords))
    return len(target & found) / len(target)


class LexicalAnswerScorer(AnswerScorer):
    """Deterministic stand-in for the neural answer classifier."""

    name = "lexical"

    def __init__(self, stopwords: frozenset[str] | None = None):
        self._stopwords = stopwords

    def score(self, passage: str, question: str, option_text: str) -> float:
        return lexical_answer_scorer(passage, question, option_text,
                                     stopwords=self._stopwords)


class RemoteAnswerScorer(AnswerScorer):
    """Client for the scoring microservice's answer task (scores in [0, 1])."""

    name = "remote"

    def __init__(self, url: str, *, model_id: str = "default", timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.model_id = model_id
        self.timeout = timeout

    def score(self, passage: str, question: str, option_text: str) -> float:
        body = {
            "task": "answer",
            "pairs": [[passage, question, option_text]],
            "model_id": self.model_id,
        }
        try:
            resp = requests.post(f"{self.url}/score", json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerError(f"remote answer scorer request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerError(
                f"remote answer scorer returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        scores = resp.json().get("scores")
        if not isinstance(scores, list) or len(scores) != 1:
            raise ScorerError("remote answer scorer response misaligned with request")
        return float(scores[0])


def _strip_period(text: str) -> str:
    text = text.strip()
    while text.endswith("."):
        text = text[:-1].rstrip()
    return text


def assemble_passage(
    facts: Sequence[ScoredFact],
    knowledge: Sequence[KnowledgeItem],
    n_facts: int,
    n_knowledge: int,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> Passage:
    """Top facts in rank order, then top knowledge in rerank order.

    Sentences are period-joined; truncation drops whole sentences from the
    tail until the token count fits the budget.
    """
    if n_facts < 0 or n_knowledge < 0:
        raise ValueError("n_facts and n_knowledge must be >= 0")
    if n_facts == 0 and n_knowledge == 0:
        raise ValueError("at least one of n_facts, n_knowledge must be positive")

    question_id = option_label = ""
    for item in (*facts[:1], *knowledge[:1]):
        question_id, option_label = item.question_id, item.option_label
        break

    sentences = [_strip_period(f.text) for f in facts[:n_facts]]
    sentences += [_strip_period(k.text) for k in knowledge[:n_knowledge]]
    sentences = [s for s in sentences if s]

    kept: list[str] = []
    total = 0
    for sent in sentences:
        n = len(tokenize(sent))
        if total + n > max_tokens:
            break
        kept.append(sent)
        total += n

    text = ". ".join(kept) + "." if kept else ""
    return Passage(
        question_id=question_id,
        option_label=option_label,
        text=text,
        token_count=total,
        max_tokens=max_tokens,
    )


def build_score_matrix(
    passages: Sequence[Passage],
    question_stem: str,
    option_texts: Sequence[str],
    scorer: AnswerScorer,
) -> ScoreMatrix:
    """Populate score(P_j, Q, A_i) for all sixteen passage/option pairs."""
    if len(passages) != 4 or len(option_texts) != 4:
        raise ValueError("exactly 4 passages and 4 option texts required")
    rows = [
        [scorer.score(p.text, question_stem, opt) for opt in option_texts]
        for p in passages
    ]
    return ScoreMatrix(rows)


def sum_score(m: ScoreMatrix) -> list[float]:
    """Pr(Q, A_i) = column sums over the four per-option passages."""
    return [sum(m.rows[j][i] for j in range(4)) for i in range(4)]


def masked_sum_score(m: ScoreMatrix, mask: Sequence[int]) -> list[float]:
    """Delta-gated column sums: only passages with mask 1 contribute."""
    return [sum(mask[j] * m.rows[j][i] for j in range(4)) for i in range(4)]


def passage_selection(pr_f: Sequence[float]) -> list[int]:
    """delta = 1 for the two largest facts-round sums (ties: lowest index)."""
    if len(pr_f) != 4:
        raise ValueError("expected 4 scores")
    top_two = sorted(range(4), key=lambda i: (-pr_f[i], i))[:2]
    return [1 if i in top_two else 0 for i in range(4)]


def argmax_lowest(scores: Sequence[float]) -> int:
    return min(range(len(scores)), key=lambda i: (-scores[i], i))


def weighted_score(
    pr_f: Sequence[float],
    pr_fk_masked: Sequence[float],
    labels: Sequence[str] = OPTION_LABELS,
) -> tuple[list[float], str]:
    """wPr = Pr(F) * Pr(F|K); the answer is the top weighted score."""
    wpr = [a * b for a, b in zip(pr_f, pr_fk_masked)]
    return wpr, labels[argmax_lowest(wpr)]


@dataclass(frozen=True)
class AnswerResult:
    """Everything the answering stage produces for one question."""

    prediction: Prediction
    matrix_f: ScoreMatrix
    pr_f: tuple[float, float, float, float]
    matrix_fk: ScoreMatrix | None
    pr_fk_masked: tuple[float, float, float, float] | None


def answer_question(
    question_id: str,
    question_stem: str,
    option_texts: Sequence[str],
    labels: Sequence[str],
    facts_by_option: Sequence[Sequence[ScoredFact]],
    knowledge_by_option: Sequence[Sequence[KnowledgeItem]],
    scorer: AnswerScorer,
    *,
    n_facts: int,
    n_knowledge: int,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> AnswerResult:
    """Run the facts round, passage selection, and (if knowledge is used)
    the delta-gated second round with weighted scoring.

    With n_knowledge = 0 the pipeline degenerates to facts-only sum scoring:
    the answer is the facts-round argmax and the weighted scores repeat the
    facts-round sums.
    """
    passages_f = [
        assemble_passage(facts_by_option[j], [], n_facts, 0, max_tokens)
        for j in range(4)
    ]
    matrix_f = build_score_matrix(passages_f, question_stem, option_texts, scorer)
    pr_f = sum_score(matrix_f)
    mask = passage_selection(pr_f)

    if n_knowledge == 0:
        chosen = labels[argmax_lowest(pr_f)]
        prediction = Prediction(
            question_id=question_id,
            chosen_label=chosen,
            sum_scores=tuple(pr_f),
            selected_mask=tuple(mask),
            weighted_scores=tuple(pr_f),
        )
        return AnswerResult(prediction, matrix_f, tuple(pr_f), None, None)

    passages_fk = [
        assemble_passage(
            facts_by_option[j], knowledge_by_option[j], n_facts, n_knowledge, max_tokens
        )
        for j in range(4)
    ]
    matrix_fk = build_score_matrix(passages_fk, question_stem, option_texts, scorer)
    pr_fk_masked = masked_sum_score(matrix_fk, mask)
    wpr, chosen = weighted_score(pr_f, pr_fk_masked, labels)
    prediction = Prediction(
        question_id=question_id,
        chosen_label=chosen,
        sum_scores=tuple(pr_f),
        selected_mask=tuple(mask),
        weighted_scores=tuple(wpr),
    )
    return AnswerResult(prediction, matrix_f, tuple(pr_f), matrix_fk, tuple(pr_fk_masked))
