"""End-to-end orchestration: stages, configuration, metrics, and reports.

The pipeline runs hypothesis generation -> open-book fact retrieval ->
abduction -> missing-knowledge retrieval -> information-gain re-ranking ->
answering, persisting every intermediate as a line-delimited JSON stage file
keyed by (question_id, option_label) so any stage can be rerun on its own.

Given a fixed config and deterministic scorers the whole run is
reproducible byte for byte, independent of the parallelism level: stage
work is fanned out per question but outputs are always written in canonical
question order.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence, TypeVar

from . import abduction, answering, corpus_io, fact_retrieval, missing_knowledge, text_core
from .abduction import AbducedQuery
from .answering import AnswerResult, Prediction
from .corpus_io import FactCorpus, KnowledgeCorpus, Question
from .errors import ConfigError, DataError
from .fact_retrieval import ScoredFact, SimilarityScorer
from .hypothesis import Hypothesis, generate_hypotheses
from .missing_knowledge import KnowledgeItem

T = TypeVar("T")
U = TypeVar("U")

log = logging.getLogger(__name__)

REMOTE_URL_ENV = "ABDUCT_IR_SCORER_URL"

STAGE_FILES = {
    "hypotheses": "hypotheses.stage.jsonl",
    "facts": "facts.stage.jsonl",
    "queries": "queries.stage.jsonl",
    "knowledge_pool": "knowledge_pool.stage.jsonl",
    "knowledge": "knowledge.stage.jsonl",
    "scores_f": "scores_f.stage.jsonl",
    "scores_fk": "scores_fk.stage.jsonl",
    "predictions": "predictions.jsonl",
    "report_jsonl": "report.jsonl",
    "report_txt": "report.txt",
    "sts_pairs": "sts_pairs.tsv",
    "bow_train": "bow_train.tsv",
}

SIMILARITY_SCORERS = ("tfidf", "lexical", "embedding", "remote")
ANSWER_SCORERS = ("lexical", "remote")
KNOWLEDGE_SCORERS = SIMILARITY_SCORERS + ("ir",)
RERANK_SIMS = ("tfidf", "embedding")


@dataclass
class PipelineConfig:
    """Declarative run configuration; CLI flags mirror these keys one-to-one."""

    questions: str = ""
    facts: str = ""
    knowledge: str | None = None
    embeddings: str | None = None
    stopwords: str | None = None
    out_dir: str = "out"

    fact_scorer: str = "tfidf"
    knowledge_scorer: str = "tfidf"
    sts_scorer: str = "lexical"
    answer_scorer: str = "lexical"
    rerank_sim: str = "tfidf"
    index_mode: str = text_core.TFIDF_COSINE

    abduction_model: str = "symmdiff"
    theta: float = 0.4
    bow_probs: str | None = None
    gen_candidates: str | None = None

    n_facts: int = 10
    n_knowledge: int = 10
    pool_m: int = 50
    top_k: int = 10
    max_tokens: int = 512
    samples_per_q: int = 8
    bow_sim_threshold: float = 0.6

    seed: int = 0
    parallelism: int = 1
    remote_url: str | None = None

    grid_n: list[int] = field(default_factory=list)
    grid_k: list[int] = field(default_factory=list)

    def validate(self, *, for_run: bool = True) -> None:
        if self.n_facts < 1:
            raise ConfigError(f"n_facts must be >= 1, got {self.n_facts}")
        if self.n_knowledge < 0:
            raise ConfigError(f"n_knowledge must be >= 0, got {self.n_knowledge}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")
        if self.pool_m < 1 or self.top_k < 1 or self.max_tokens < 1:
            raise ConfigError("pool_m, top_k and max_tokens must all be >= 1")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.fact_scorer not in SIMILARITY_SCORERS:
            raise ConfigError(f"unknown fact_scorer {self.fact_scorer!r}")
        if self.knowledge_scorer not in KNOWLEDGE_SCORERS:
            raise ConfigError(f"unknown knowledge_scorer {self.knowledge_scorer!r}")
        if self.sts_scorer not in ("lexical", "embedding", "remote"):
            raise ConfigError(f"unknown sts_scorer {self.sts_scorer!r}")
        if self.answer_scorer not in ANSWER_SCORERS:
            raise ConfigError(f"unknown answer_scorer {self.answer_scorer!r}")
        if self.rerank_sim not in RERANK_SIMS:
            raise ConfigError(f"unknown rerank_sim {self.rerank_sim!r}")
        if self.index_mode not in (text_core.TFIDF_COSINE, text_core.BM25):
            raise ConfigError(f"unknown index_mode {self.index_mode!r}")
        if self.abduction_model not in abduction.MODELS:
            raise ConfigError(f"unknown abduction_model {self.abduction_model!r}")
        if not for_run:
            return
        if not self.questions:
            raise ConfigError("questions path is required")
        if not self.facts:
            raise ConfigError("facts path is required")
        if self.n_knowledge > 0 and not self.knowledge:
            raise ConfigError("knowledge path is required when n_knowledge > 0")
        for name in ("questions", "facts", "knowledge", "embeddings", "stopwords",
                     "bow_probs", "gen_candidates"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")

    @classmethod
    def from_file(cls, path: str | Path, overrides: Mapping[str, object] | None = None
                  ) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if overrides:
            cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        return cfg

    def stage_path(self, stage: str) -> Path:
        return Path(self.out_dir) / STAGE_FILES[stage]


@dataclass
class EvalReport:
    """Accuracy plus the gold-fact retrieval counts (Precision@N style)."""

    accuracy: float
    n_correct: int
    n_total: int
    any_passage_count: int | None = None
    correct_passage_count: int | None = None
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n_total and abs(self.accuracy - self.n_correct / self.n_total) > 1e-12:
            raise ValueError("accuracy must equal n_correct / n_total")
        for count in (self.any_passage_count, self.correct_passage_count):
            if count is not None and count > self.n_total:
                raise ValueError("passage counts cannot exceed n_total")

    def to_record(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "any_passage": self.any_passage_count,
            "correct_passage": self.correct_passage_count,
        }


_PUNCT_RE = re.compile(r"[^0-9a-z]+")


def normalize_for_match(text: str) -> str:
    """Lowercased, punctuation-stripped form used for gold-fact matching."""
    return " ".join(_PUNCT_RE.sub(" ", text.lower()).split())


def _pmap(fn: Callable[[T], U], items: Sequence[T], workers: int) -> list[U]:
    """Order-preserving map, threaded when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Runtime:
    """Lazily loaded corpora, indexes, and scorers shared across stages."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._cache: dict[str, object] = {}

    def _get(self, key: str, build: Callable[[], object]):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def stopwords(self) -> frozenset[str] | None:
        if not self.config.stopwords:
            return None
        return self._get("stopwords", lambda: text_core.load_stopwords(self.config.stopwords))

    @property
    def questions(self) -> list[Question]:
        return self._get("questions", lambda: corpus_io.load_questions(self.config.questions))

    @property
    def facts(self) -> FactCorpus:
        return self._get("facts", lambda: corpus_io.load_facts(self.config.facts))

    @property
    def knowledge(self) -> KnowledgeCorpus:
        if not self.config.knowledge:
            raise ConfigError("knowledge corpus path not configured")
        return self._get("knowledge", lambda: corpus_io.load_knowledge(self.config.knowledge))

    @property
    def embeddings(self) -> corpus_io.EmbeddingTable:
        if not self.config.embeddings:
            raise ConfigError("embeddings path not configured")
        return self._get("embeddings", lambda: corpus_io.load_embeddings(self.config.embeddings))

    @property
    def knowledge_index(self) -> text_core.InvertedIndex:
        return self._get(
            "knowledge_index",
            lambda: text_core.build_index(
                list(self.knowledge.sentences), self.config.index_mode,
                stopwords=self.stopwords,
            ),
        )

    def remote_url(self) -> str:
        url = os.environ.get(REMOTE_URL_ENV) or self.config.remote_url
        if not url:
            raise ConfigError(
                f"remote scorer selected but neither {REMOTE_URL_ENV} nor "
                "remote_url is set"
            )
        return url

    def similarity_scorer(self, name: str, corpus_texts: Sequence[str]) -> SimilarityScorer:
        if name == "tfidf":
            return fact_retrieval.TfidfCosineScorer(corpus_texts, stopwords=self.stopwords)
        if name == "lexical":
            return fact_retrieval.LexicalStsScorer(stopwords=self.stopwords)
        if name == "embedding":
            return fact_retrieval.EmbeddingCosineScorer(self.embeddings)
        if name == "remote":
            return fact_retrieval.RemoteScorer(self.remote_url())
        raise ConfigError(f"unknown similarity scorer {name!r}")

    def answer_scorer(self) -> answering.AnswerScorer:
        if self.config.answer_scorer == "lexical":
            return answering.LexicalAnswerScorer(stopwords=self.stopwords)
        return answering.RemoteAnswerScorer(self.remote_url())

    def rerank_sim_fn(self) -> missing_knowledge.SimFn:
        if self.config.rerank_sim == "embedding":
            return missing_knowledge.embedding_sim(self.embeddings)
        return missing_knowledge.tfidf_sim(self.knowledge_index, stopwords=self.stopwords)


def _require_stage(config: PipelineConfig, stage: str) -> Path:
    path = config.stage_path(stage)
    if not path.exists():
        raise DataError(
            f"missing stage file {path}; run the producing subcommand first"
        )
    return path


def _ensure_out_dir(config: PipelineConfig) -> None:
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------


def stage_hypothesize(config: PipelineConfig, rt: _Runtime | None = None) -> list[Hypothesis]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    per_question = _pmap(
        lambda q: generate_hypotheses(q, stopwords=rt.stopwords),
        rt.questions, config.parallelism,
    )
    hypotheses = [h for quad in per_question for h in quad]
    corpus_io.write_jsonl(
        (h.to_record() for h in hypotheses), config.stage_path("hypotheses")
    )
    return hypotheses


def _load_hypotheses(config: PipelineConfig) -> list[Hypothesis]:
    path = _require_stage(config, "hypotheses")
    return [Hypothesis.from_record(rec) for rec in corpus_io.read_jsonl(path)]


def stage_retrieve_facts(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    hypotheses: list[Hypothesis] | None = None,
) -> dict[tuple[str, str], list[ScoredFact]]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if hypotheses is None:
        hypotheses = _load_hypotheses(config)
    scorer = rt.similarity_scorer(config.fact_scorer, rt.facts.texts)
    results = _pmap(
        lambda h: fact_retrieval.retrieve_facts(h, scorer, rt.facts, config.n_facts),
        hypotheses, config.parallelism,
    )
    by_key = {(h.question_id, h.option_label): facts
              for h, facts in zip(hypotheses, results)}
    corpus_io.write_jsonl(
        (
            {
                "question_id": h.question_id,
                "option_label": h.option_label,
                "facts": [f.to_record() for f in facts],
            }
            for h, facts in zip(hypotheses, results)
        ),
        config.stage_path("facts"),
    )
    return by_key


def _load_fact_stage(config: PipelineConfig) -> dict[tuple[str, str], list[ScoredFact]]:
    path = _require_stage(config, "facts")
    by_key: dict[tuple[str, str], list[ScoredFact]] = {}
    for rec in corpus_io.read_jsonl(path):
        key = (rec["question_id"], rec["option_label"])
        by_key[key] = [
            ScoredFact(question_id=key[0], option_label=key[1],
                       fact_id=f["fact_id"], text=f["text"], rel=f["rel"])
            for f in rec["facts"]
        ]
    return by_key


def stage_gen_sts_pairs(config: PipelineConfig, rt: _Runtime | None = None
                        ) -> list[fact_retrieval.StsTrainingPair]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    scorer = rt.similarity_scorer(config.sts_scorer, rt.facts.texts)
    pairs = fact_retrieval.generate_sts_training_pairs(
        rt.questions, rt.facts, scorer, config.samples_per_q, seed=config.seed
    )
    fact_retrieval.save_sts_pairs(pairs, config.stage_path("sts_pairs"))
    return pairs


def _load_gen_candidates(config: PipelineConfig) -> dict[tuple[str, str], list[str]]:
    if not config.gen_candidates:
        raise ConfigError("abduction_model=generated requires gen_candidates path")
    by_key: dict[tuple[str, str], list[str]] = {}
    for rec in corpus_io.read_jsonl(config.gen_candidates):
        key = (rec["question_id"], rec["option_label"])
        cands = rec.get("candidates") or []
        if isinstance(cands, str):
            cands = [cands]
        by_key[key] = list(cands)
    return by_key


def _abduce_one(
    config: PipelineConfig,
    h: Hypothesis,
    facts: Sequence[ScoredFact],
    question: Question,
    provider: abduction.WordProbProvider | None,
    candidates: Mapping[tuple[str, str], list[str]] | None,
    stopwords: frozenset[str] | None,
) -> AbducedQuery:
    # Abduction pairs the hypothesis with its single best retrieved fact.
    f_tokens = (
        text_core.TokenSet.from_text(facts[0].text, stopwords=stopwords)
        if facts else text_core.TokenSet(())
    )
    kw = {"question_id": h.question_id, "option_label": h.option_label}
    model = config.abduction_model
    if model == "symmdiff":
        return abduction.symmetric_difference_query(h.token_set, f_tokens, **kw)
    if model == "union":
        return abduction.word_union_query(h.token_set, f_tokens, **kw)
    if model == "bow":
        return abduction.bag_of_words_query(
            h.token_set, f_tokens, provider, config.theta, **kw
        )
    # generated: candidates come from an external seq2seq model; keep the one
    # with best gold overlap when gold is available, else the first.
    cands = (candidates or {}).get((h.question_id, h.option_label), [])
    if not cands:
        raise DataError(
            f"no generated candidates for ({h.question_id}, {h.option_label})"
        )
    if len(cands) > 1 and question.gold_missing_knowledge:
        chosen = abduction.select_generated_knowledge(
            cands,
            text_core.TokenSet.from_text(h.text, remove_stopwords=False),
            text_core.TokenSet.from_text(facts[0].text if facts else "",
                                         remove_stopwords=False),
            text_core.TokenSet.from_tokens(
                t
                for g in question.gold_missing_knowledge
                for t in text_core.tokenize(g)
            ),
        )
    else:
        chosen = cands[0]
    return AbducedQuery(
        question_id=h.question_id,
        option_label=h.option_label,
        model="generated",
        tokens=text_core.TokenSet.from_text(chosen, remove_stopwords=False),
        query_text=chosen,
    )


def stage_abduce(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    hypotheses: list[Hypothesis] | None = None,
    facts_by_key: dict[tuple[str, str], list[ScoredFact]] | None = None,
) -> list[AbducedQuery]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if hypotheses is None:
        hypotheses = _load_hypotheses(config)
    if facts_by_key is None:
        facts_by_key = _load_fact_stage(config)
    provider = None
    if config.abduction_model == "bow":
        if not config.bow_probs:
            raise ConfigError("abduction_model=bow requires bow_probs path")
        provider = abduction.TableProbProvider.from_file(config.bow_probs)
    candidates = (
        _load_gen_candidates(config) if config.abduction_model == "generated" else None
    )
    q_by_id = {q.id: q for q in rt.questions}
    queries = _pmap(
        lambda h: _abduce_one(
            config, h, facts_by_key.get((h.question_id, h.option_label), []),
            q_by_id[h.question_id], provider, candidates, rt.stopwords,
        ),
        hypotheses, config.parallelism,
    )
    corpus_io.write_jsonl((q.to_record() for q in queries), config.stage_path("queries"))
    return queries


def stage_gen_bow_data(config: PipelineConfig, rt: _Runtime | None = None
                       ) -> list[abduction.BowTrainingExample]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    hypotheses = _load_hypotheses(config)
    facts_by_key = _load_fact_stage(config)
    all_facts = [f for facts in facts_by_key.values() for f in facts]
    examples = abduction.build_bow_training_data(
        rt.questions, hypotheses, all_facts, rt.embeddings,
        config.bow_sim_threshold, seed=config.seed,
    )
    abduction.save_bow_training_data(examples, config.stage_path("bow_train"))
    return examples


def _rel_scorer_and_max(
    rt: _Runtime, pools: Sequence[Sequence[KnowledgeItem]] | None = None
) -> tuple[SimilarityScorer | None, float]:
    name = rt.config.knowledge_scorer
    if name == "ir":
        # Raw IR relevance: normalize by the largest score seen so the
        # (1 - red) term stays commensurate. Ordering is unaffected.
        top = 1.0
        if pools:
            top = max((it.rel for pool in pools for it in pool), default=1.0)
        return None, max(top, 1e-12)
    scorer = rt.similarity_scorer(name, list(rt.knowledge.sentences))
    return scorer, scorer.score_range[1]


def stage_retrieve_knowledge(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    queries: list[AbducedQuery] | None = None,
    hypotheses: list[Hypothesis] | None = None,
) -> list[list[KnowledgeItem]]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if queries is None:
        queries = [
            AbducedQuery.from_record(rec)
            for rec in corpus_io.read_jsonl(_require_stage(config, "queries"))
        ]
    if hypotheses is None:
        hypotheses = _load_hypotheses(config)
    hyp_by_key = {(h.question_id, h.option_label): h for h in hypotheses}
    scorer, _ = _rel_scorer_and_max(rt)

    def pull(query: AbducedQuery) -> list[KnowledgeItem]:
        hyp = hyp_by_key.get((query.question_id, query.option_label))
        return missing_knowledge.retrieve_candidates(
            query, rt.knowledge_index, rt.knowledge, config.pool_m,
            scorer=scorer, hypothesis_text=hyp.text if (scorer and hyp) else None,
        )

    pools = _pmap(pull, queries, config.parallelism)
    n_empty = sum(not q.tokens for q in queries)
    if n_empty:
        log.warning("retrieve-knowledge: %d empty queries produced empty pools", n_empty)
    corpus_io.write_jsonl(
        (
            {
                "question_id": q.question_id,
                "option_label": q.option_label,
                "items": [it.to_record() for it in pool],
            }
            for q, pool in zip(queries, pools)
        ),
        config.stage_path("knowledge_pool"),
    )
    return pools


def _load_knowledge_stage(
    config: PipelineConfig, stage: str
) -> list[tuple[tuple[str, str], list[KnowledgeItem]]]:
    path = _require_stage(config, stage)
    out = []
    for rec in corpus_io.read_jsonl(path):
        key = (rec["question_id"], rec["option_label"])
        items = [
            KnowledgeItem(
                question_id=key[0], option_label=key[1], sent_id=it["sent_id"],
                text=it["text"], rel=it["rel"], red=it.get("red", 0.0),
                rank_score=it.get("rank_score", 0.0),
            )
            for it in rec["items"]
        ]
        out.append((key, items))
    return out


def stage_rerank(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    pools: list[tuple[tuple[str, str], list[KnowledgeItem]]] | None = None,
) -> dict[tuple[str, str], list[KnowledgeItem]]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if pools is None:
        pools = _load_knowledge_stage(config, "knowledge_pool")
    sim_fn = rt.rerank_sim_fn()
    _, rel_max = _rel_scorer_and_max(rt, [items for _, items in pools])
    selections = _pmap(
        lambda entry: missing_knowledge.information_gain_rerank(
            entry[1], sim_fn, config.top_k, rel_range_max=rel_max
        ),
        pools, config.parallelism,
    )
    corpus_io.write_jsonl(
        (
            {
                "question_id": key[0],
                "option_label": key[1],
                "items": [it.to_record() for it in sel],
            }
            for (key, _), sel in zip(pools, selections)
        ),
        config.stage_path("knowledge"),
    )
    return {key: sel for (key, _), sel in zip(pools, selections)}


def stage_answer(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    facts_by_key: dict[tuple[str, str], list[ScoredFact]] | None = None,
    knowledge_by_key: dict[tuple[str, str], list[KnowledgeItem]] | None = None,
) -> list[Prediction]:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if facts_by_key is None:
        facts_by_key = _load_fact_stage(config)
    if knowledge_by_key is None:
        if config.n_knowledge > 0:
            knowledge_by_key = dict(_load_knowledge_stage(config, "knowledge"))
        else:
            knowledge_by_key = {}
    scorer = rt.answer_scorer()

    def solve(q: Question) -> AnswerResult:
        keys = [(q.id, label) for label in q.labels]
        return answering.answer_question(
            q.id, q.stem, [o.text for o in q.options], list(q.labels),
            [facts_by_key.get(k, []) for k in keys],
            [knowledge_by_key.get(k, []) for k in keys],
            scorer,
            n_facts=config.n_facts,
            n_knowledge=config.n_knowledge,
            max_tokens=config.max_tokens,
        )

    results = _pmap(solve, rt.questions, config.parallelism)

    corpus_io.write_jsonl(
        (
            {"question_id": q.id, "matrix": r.matrix_f.rows, "sum_scores": list(r.pr_f)}
            for q, r in zip(rt.questions, results)
        ),
        config.stage_path("scores_f"),
    )
    fk_records = [
        {
            "question_id": q.id,
            "matrix": r.matrix_fk.rows,
            "mask": list(r.prediction.selected_mask),
            "masked_sums": list(r.pr_fk_masked),
        }
        for q, r in zip(rt.questions, results)
        if r.matrix_fk is not None
    ]
    if fk_records:
        corpus_io.write_jsonl(fk_records, config.stage_path("scores_fk"))
    predictions = [r.prediction for r in results]
    corpus_io.write_jsonl(
        (p.to_record() for p in predictions), config.stage_path("predictions")
    )
    return predictions


def compute_metrics(
    predictions: Sequence[Prediction],
    questions: Sequence[Question],
    fact_retrievals: Mapping[tuple[str, str], Sequence[str]],
) -> EvalReport:
    """Accuracy plus gold-fact hit counts over the retrieved top-N lists.

    ``any_passage_count`` counts questions whose gold fact appears (exact
    match after normalization) in any option's retrieved list;
    ``correct_passage_count`` restricts to the correct option's list. Counts
    are omitted when no question carries a gold fact.
    """
    q_by_id = {q.id: q for q in questions}
    n_correct = 0
    for p in predictions:
        q = q_by_id.get(p.question_id)
        if q is None:
            raise DataError(f"prediction for unknown question id {p.question_id!r}")
        if p.chosen_label == q.answer_key:
            n_correct += 1
    n_total = len(predictions)
    if n_total == 0:
        raise DataError("no predictions to evaluate")

    scored_qids = {p.question_id for p in predictions}
    any_count: int | None = None
    correct_count: int | None = None
    if any(q.gold_fact for q in questions if q.id in scored_qids):
        any_count = correct_count = 0
        for q in questions:
            if q.id not in scored_qids or not q.gold_fact:
                continue
            gold = normalize_for_match(q.gold_fact)
            hit_any = False
            hit_correct = False
            for label in q.labels:
                texts = fact_retrievals.get((q.id, label), ())
                if any(normalize_for_match(t) == gold for t in texts):
                    hit_any = True
                    if label == q.answer_key:
                        hit_correct = True
            any_count += hit_any
            correct_count += hit_correct

    return EvalReport(
        accuracy=n_correct / n_total,
        n_correct=n_correct,
        n_total=n_total,
        any_passage_count=any_count,
        correct_passage_count=correct_count,
    )


def render_report_text(report: EvalReport, config: PipelineConfig) -> str:
    lines = ["# abduct-ir evaluation report"]
    lines.append(
        f"config: fact_scorer={config.fact_scorer} knowledge_scorer={config.knowledge_scorer} "
        f"answer_scorer={config.answer_scorer} abduction={config.abduction_model}"
    )
    header = f"{'N':>4} {'K':>4} {'any':>6} {'correct':>8} {'accuracy%':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    rows = report.rows or [
        {
            "n_facts": config.n_facts,
            "n_knowledge": config.n_knowledge,
            **report.to_record(),
        }
    ]
    for row in rows:
        any_s = "-" if row.get("any_passage") is None else str(row["any_passage"])
        cor_s = "-" if row.get("correct_passage") is None else str(row["correct_passage"])
        lines.append(
            f"{row['n_facts']:>4} {row['n_knowledge']:>4} {any_s:>6} {cor_s:>8} "
            f"{100.0 * row['accuracy']:>10.1f}"
        )
    return "\n".join(lines) + "\n"


def _write_report(report: EvalReport, config: PipelineConfig) -> None:
    rows = report.rows or [
        {"n_facts": config.n_facts, "n_knowledge": config.n_knowledge, **report.to_record()}
    ]
    corpus_io.write_jsonl(rows, config.stage_path("report_jsonl"))
    config.stage_path("report_txt").write_text(
        render_report_text(report, config), encoding="utf-8"
    )


def stage_evaluate(
    config: PipelineConfig,
    rt: _Runtime | None = None,
    predictions: Sequence[Prediction] | None = None,
    facts_by_key: dict[tuple[str, str], list[ScoredFact]] | None = None,
) -> EvalReport:
    rt = rt or _Runtime(config)
    _ensure_out_dir(config)
    if predictions is None:
        predictions = [
            Prediction.from_record(rec)
            for rec in corpus_io.read_jsonl(_require_stage(config, "predictions"))
        ]
    if facts_by_key is None:
        facts_by_key = _load_fact_stage(config)
    retrieval_texts = {
        key: [f.text for f in facts] for key, facts in facts_by_key.items()
    }
    report = compute_metrics(predictions, rt.questions, retrieval_texts)
    _write_report(report, config)
    return report


def run_pipeline(config: PipelineConfig) -> tuple[list[Prediction], EvalReport]:
    """Execute every stage in order, persisting all intermediates."""
    config.validate()
    rt = _Runtime(config)
    hypotheses = stage_hypothesize(config, rt)
    facts_by_key = stage_retrieve_facts(config, rt, hypotheses)
    knowledge_by_key: dict[tuple[str, str], list[KnowledgeItem]] = {}
    if config.n_knowledge > 0:
        queries = stage_abduce(config, rt, hypotheses, facts_by_key)
        pools = stage_retrieve_knowledge(config, rt, queries, hypotheses)
        keyed_pools = [
            ((q.question_id, q.option_label), pool) for q, pool in zip(queries, pools)
        ]
        knowledge_by_key = stage_rerank(config, rt, keyed_pools)
    predictions = stage_answer(config, rt, facts_by_key, knowledge_by_key)
    report = stage_evaluate(config, rt, predictions, facts_by_key)
    return predictions, report


def run_grid(config: PipelineConfig) -> EvalReport:
    """Sweep (n_facts, n_knowledge) combinations, reusing retrieval stages.

    Retrieval and re-ranking run once at the sweep maxima; each grid row then
    truncates the per-option lists, which is equivalent to running that row's
    configuration directly (top-N lists and greedy selections are prefix
    stable).
    """
    grid_n = config.grid_n or [config.n_facts]
    grid_k = config.grid_k or [config.n_knowledge]
    if any(n < 1 for n in grid_n):
        raise ConfigError("grid_n values must be >= 1")
    if any(k < 0 for k in grid_k):
        raise ConfigError("grid_k values must be >= 0")

    base = replace(
        config,
        n_facts=max(grid_n),
        n_knowledge=max(grid_k),
        top_k=max(max(grid_k), config.top_k, 1),
    )
    base.validate()
    rt = _Runtime(base)
    hypotheses = stage_hypothesize(base, rt)
    facts_by_key = stage_retrieve_facts(base, rt, hypotheses)
    knowledge_by_key: dict[tuple[str, str], list[KnowledgeItem]] = {}
    if max(grid_k) > 0:
        queries = stage_abduce(base, rt, hypotheses, facts_by_key)
        pools = stage_retrieve_knowledge(base, rt, queries, hypotheses)
        keyed = [((q.question_id, q.option_label), p) for q, p in zip(queries, pools)]
        knowledge_by_key = stage_rerank(base, rt, keyed)

    rows: list[dict] = []
    last: EvalReport | None = None
    for n in grid_n:
        facts_n = {k: v[:n] for k, v in facts_by_key.items()}
        retrieval_texts = {k: [f.text for f in v] for k, v in facts_n.items()}
        for k in grid_k:
            row_cfg = replace(base, n_facts=n, n_knowledge=k)
            knowledge_k = {key: v[:k] for key, v in knowledge_by_key.items()}
            predictions = stage_answer(row_cfg, rt, facts_n, knowledge_k)
            report = compute_metrics(predictions, rt.questions, retrieval_texts)
            rows.append({"n_facts": n, "n_knowledge": k, **report.to_record()})
            last = report

    assert last is not None
    final = EvalReport(
        accuracy=last.accuracy,
        n_correct=last.n_correct,
        n_total=last.n_total,
        any_passage_count=last.any_passage_count,
        correct_passage_count=last.correct_passage_count,
        rows=rows,
    )
    _write_report(final, config)
    return final
