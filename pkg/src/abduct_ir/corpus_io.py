"""Loading, validation, and persistence of all external pipeline data.

Input formats follow the released dataset: questions are line-delimited JSON
(one object per line, ``id`` / ``question.stem`` / ``question.choices`` /
``answerKey``), the open book and the common-knowledge corpus are plain UTF-8
text with one entry per line, and embeddings are TSV (``key TAB float*dim``).
Intermediate stage artifacts are line-delimited JSON keyed by
``(question_id, option_label)`` so any stage can be rerun independently.

Everything returned here is immutable after load and safe for concurrent
reads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DataError

OPTION_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class Option:
    label: str
    text: str


@dataclass(frozen=True)
class Question:
    """One multiple-choice item: a stem, exactly four labeled options, and the
    answer key, plus the optional gold supporting fact and gold missing
    knowledge used by training-data generators and evaluation."""

    id: str
    stem: str
    options: tuple[Option, ...]
    answer_key: str
    gold_fact: str | None = None
    gold_missing_knowledge: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.stem:
            raise DataError(f"question {self.id!r}: empty stem")
        if len(self.options) != 4:
            raise DataError(
                f"question {self.id!r}: expected exactly 4 options, got {len(self.options)}"
            )
        labels = [o.label for o in self.options]
        if len(set(labels)) != 4 or any(l not in OPTION_LABELS for l in labels):
            raise DataError(f"question {self.id!r}: option labels {labels} invalid")
        if self.answer_key not in labels:
            raise DataError(
                f"question {self.id!r}: answer_key {self.answer_key!r} not among labels"
            )

    def option_text(self, label: str) -> str:
        for opt in self.options:
            if opt.label == label:
                return opt.text
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)


@dataclass(frozen=True)
class FactCorpus:
    """The open book: an ordered, densely indexed list of fact sentences."""

    texts: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.texts:
            raise DataError("fact corpus is empty")
        if any(not t for t in self.texts):
            raise DataError("fact corpus contains an empty fact")

    def __len__(self) -> int:
        return len(self.texts)

    def __getitem__(self, fact_id: int) -> str:
        return self.texts[fact_id]

    @property
    def facts(self) -> list[tuple[int, str]]:
        return list(enumerate(self.texts))


@dataclass(frozen=True)
class KnowledgeCorpus:
    """External common-knowledge sentences, one per dense sent_id."""

    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise DataError("knowledge corpus is empty")
        if any(not s for s in self.sentences):
            raise DataError("knowledge corpus contains an empty sentence")

    def __len__(self) -> int:
        return len(self.sentences)

    def __getitem__(self, sent_id: int) -> str:
        return self.sentences[sent_id]


@dataclass(frozen=True)
class EmbeddingTable:
    """Dense vectors keyed by exact text, all with the same dimension."""

    vectors: dict[str, tuple[float, ...]]
    dim: int

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __getitem__(self, key: str) -> tuple[float, ...]:
        return self.vectors[key]

    def __len__(self) -> int:
        return len(self.vectors)


def _parse_question(obj: dict, where: str) -> Question:
    try:
        qid = obj["id"]
        inner = obj["question"]
        stem = inner["stem"]
        choices = inner["choices"]
        answer_key = obj["answerKey"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{where}: missing field {exc}") from exc
    if not isinstance(choices, list):
        raise DataError(f"{where}: question.choices must be a list")
    try:
        options = tuple(Option(label=c["label"], text=c["text"]) for c in choices)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{where}: choice missing label/text: {exc}") from exc

    gold_fact = obj.get("gold_fact") or obj.get("fact1") or None
    gold_mk = obj.get("gold_missing_knowledge") or obj.get("missing_knowledge")
    if isinstance(gold_mk, str):
        gold_mk = (gold_mk,)
    elif gold_mk is not None:
        gold_mk = tuple(gold_mk)
    return Question(
        id=str(qid), stem=stem, options=options, answer_key=answer_key,
        gold_fact=gold_fact, gold_missing_knowledge=gold_mk,
    )


def load_questions(path: str | Path) -> list[Question]:
    """Load a JSONL question file in the released dataset format.

    Unknown JSON fields are ignored; malformed lines and invariant violations
    raise :class:`DataError` naming the offending line.
    """
    questions: list[Question] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            q = _parse_question(obj, f"{path}:{lineno}")
            if q.id in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate question id {q.id!r}")
            seen_ids.add(q.id)
            questions.append(q)
    if not questions:
        raise DataError(f"{path}: no questions")
    return questions


def save_questions(questions: Iterable[Question], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            obj: dict = {
                "id": q.id,
                "question": {
                    "stem": q.stem,
                    "choices": [{"label": o.label, "text": o.text} for o in q.options],
                },
                "answerKey": q.answer_key,
            }
            if q.gold_fact is not None:
                obj["gold_fact"] = q.gold_fact
            if q.gold_missing_knowledge is not None:
                obj["gold_missing_knowledge"] = list(q.gold_missing_knowledge)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_facts(path: str | Path) -> FactCorpus:
    """Load the open book: one fact per line, optionally wrapped in quotes.

    Surrounding double quotes are stripped (the released file quotes each
    fact); blank lines are skipped; order is preserved.
    """
    texts: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if len(line) >= 2 and line[0] == '"' and line[-1] == '"':
                line = line[1:-1]
            if line:
                texts.append(line)
    if not texts:
        raise DataError(f"{path}: fact corpus is empty")
    return FactCorpus(tuple(texts))


def save_facts(corpus: FactCorpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for text in corpus.texts:
            fh.write(text + "\n")


def load_knowledge(path: str | Path) -> KnowledgeCorpus:
    """Load the common-knowledge corpus: one sentence per line, blanks skipped."""
    sentences: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                sentences.append(line)
    if not sentences:
        raise DataError(f"{path}: knowledge corpus is empty")
    return KnowledgeCorpus(tuple(sentences))


def save_knowledge(corpus: KnowledgeCorpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for text in corpus.sentences:
            fh.write(text + "\n")


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a TSV embedding file: ``key TAB v1 TAB ... TAB vdim``."""
    vectors: dict[str, tuple[float, ...]] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected key TAB floats")
            key = parts[0]
            if key in vectors:
                raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                vec = tuple(float(x) for x in parts[1:])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad float: {exc}") from exc
            if any(math.isnan(x) or math.isinf(x) for x in vec):
                raise DataError(f"{path}:{lineno}: NaN/Inf component in vector for {key!r}")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DataError(
                    f"{path}:{lineno}: ragged dims: expected {dim}, got {len(vec)}"
                )
            vectors[key] = vec
    if not vectors or dim is None:
        raise DataError(f"{path}: embedding table is empty")
    return EmbeddingTable(vectors=vectors, dim=dim)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Serialize with shortest round-trip float repr so save/load is lossless."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, vec in table.vectors.items():
            fh.write(key + "\t" + "\t".join(repr(x) for x in vec) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    """Read a stage artifact file; raises DataError with the line number."""
    records: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
    return records


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
