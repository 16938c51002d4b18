"""Loader validation, error reporting, and golden round-trips."""

from __future__ import annotations

import json
import random

import pytest

from abduct_ir.corpus_io import (
    EmbeddingTable,
    Option,
    Question,
    load_embeddings,
    load_facts,
    load_knowledge,
    load_questions,
    save_embeddings,
    save_facts,
    save_knowledge,
    save_questions,
)
from abduct_ir.errors import DataError


def _question_obj(qid="q1", answer="B"):
    return {
        "id": qid,
        "question": {
            "stem": "Water freezes at what temperature?",
            "choices": [
                {"label": "A", "text": "ten degrees"},
                {"label": "B", "text": "zero degrees"},
                {"label": "C", "text": "fifty degrees"},
                {"label": "D", "text": "ninety degrees"},
            ],
        },
        "answerKey": answer,
    }


class TestLoadQuestions:
    def test_fixture_counts(self, questions_20):
        assert len(questions_20) == 20
        assert questions_20[0].id == "q01"
        assert questions_20[0].answer_key == "C"
        assert questions_20[0].gold_fact == "hawks eat lizards"

    def test_minimal_record(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(_question_obj()) + "\n")
        qs = load_questions(p)
        assert len(qs) == 1
        assert qs[0].answer_key == "B"

    def test_unknown_fields_ignored(self, tmp_path):
        obj = _question_obj()
        obj["extra"] = {"anything": 1}
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(obj) + "\n")
        assert load_questions(p)[0].id == "q1"

    def test_empty_file_errors(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text("")
        with pytest.raises(DataError, match="no questions"):
            load_questions(p)

    def test_malformed_line_names_line_number(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(_question_obj()) + "\n{oops\n")
        with pytest.raises(DataError, match=":2"):
            load_questions(p)

    def test_wrong_option_count(self, tmp_path):
        obj = _question_obj()
        obj["question"]["choices"] = obj["question"]["choices"][:3]
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(obj) + "\n")
        with pytest.raises(DataError, match="4 options"):
            load_questions(p)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(_question_obj()) + "\n" + json.dumps(_question_obj()) + "\n")
        with pytest.raises(DataError, match="duplicate"):
            load_questions(p)

    def test_gold_missing_knowledge_string_coerced(self, tmp_path):
        obj = _question_obj()
        obj["gold_missing_knowledge"] = "ice is frozen water"
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(obj) + "\n")
        assert load_questions(p)[0].gold_missing_knowledge == ("ice is frozen water",)

    def test_fact1_alias(self, tmp_path):
        obj = _question_obj()
        obj["fact1"] = "water freezes at zero degrees celsius"
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(obj) + "\n")
        assert load_questions(p)[0].gold_fact == "water freezes at zero degrees celsius"

    @pytest.mark.parametrize("mutate", [
        lambda o: o.__setitem__("answerKey", "E"),
        lambda o: o["question"].__setitem__("stem", ""),
        lambda o: o["question"]["choices"][1].__setitem__("label", "A"),
        lambda o: o["question"].__setitem__(
            "choices", o["question"]["choices"] + [{"label": "E", "text": "x"}]),
        lambda o: o["question"]["choices"][0].__delitem__("text"),
    ])
    def test_mutations_rejected(self, tmp_path, mutate):
        obj = _question_obj()
        mutate(obj)
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps(obj) + "\n")
        with pytest.raises(DataError):
            load_questions(p)

    def test_round_trip(self, questions_20, tmp_path):
        p = tmp_path / "q.jsonl"
        save_questions(questions_20, p)
        assert load_questions(p) == questions_20


class TestQuestionType:
    def test_option_text_lookup(self):
        q = Question(
            id="x", stem="s?", answer_key="A",
            options=tuple(Option(l, f"t{l}") for l in "ABCD"),
        )
        assert q.option_text("C") == "tC"
        with pytest.raises(KeyError):
            q.option_text("E")


class TestLoadFacts:
    def test_quote_stripping(self, tmp_path):
        p = tmp_path / "facts.txt"
        p.write_text(
            '"a punnett square is used to identify the percent chance of a trait '
            'being passed down from a parent to its offspring."\n'
        )
        corpus = load_facts(p)
        assert corpus[0].startswith("a punnett square")
        assert not corpus[0].startswith('"')

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "facts.txt"
        p.write_text("fact one\n\nfact two\n")
        corpus = load_facts(p)
        assert len(corpus) == 2
        assert corpus.facts == [(0, "fact one"), (1, "fact two")]

    def test_empty_corpus_errors(self, tmp_path):
        p = tmp_path / "facts.txt"
        p.write_text("\n\n")
        with pytest.raises(DataError):
            load_facts(p)

    def test_fixture_size(self, fact_corpus):
        assert len(fact_corpus) == 30

    def test_round_trip(self, fact_corpus, tmp_path):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        save_facts(fact_corpus, a)
        reloaded = load_facts(a)
        assert reloaded == fact_corpus
        save_facts(reloaded, b)
        assert a.read_bytes() == b.read_bytes()


class TestLoadKnowledge:
    def test_fixture(self, knowledge_corpus):
        assert "Every gecko is a lizard." in knowledge_corpus.sentences
        assert len(knowledge_corpus) == 40

    def test_round_trip(self, knowledge_corpus, tmp_path):
        p = tmp_path / "k.txt"
        save_knowledge(knowledge_corpus, p)
        assert load_knowledge(p) == knowledge_corpus

    def test_empty_errors(self, tmp_path):
        p = tmp_path / "k.txt"
        p.write_text(" \n")
        with pytest.raises(DataError):
            load_knowledge(p)


class TestEmbeddings:
    def test_small_table(self, tmp_path):
        p = tmp_path / "emb.tsv"
        p.write_text("alpha\t1.0\t0.0\t0.5\t0.25\nbeta\t0.0\t1.0\t2.0\t3.0\n")
        table = load_embeddings(p)
        assert table.dim == 4
        assert table["alpha"] == (1.0, 0.0, 0.5, 0.25)

    def test_duplicate_key_errors(self, tmp_path):
        p = tmp_path / "emb.tsv"
        p.write_text("k\t1.0\nk\t2.0\n")
        with pytest.raises(DataError, match="duplicate key"):
            load_embeddings(p)

    def test_ragged_dims_error(self, tmp_path):
        p = tmp_path / "emb.tsv"
        p.write_text("a\t1.0\t2.0\nb\t1.0\n")
        with pytest.raises(DataError, match="ragged"):
            load_embeddings(p)

    def test_nan_component_errors(self, tmp_path):
        p = tmp_path / "emb.tsv"
        p.write_text("a\tnan\t1.0\n")
        with pytest.raises(DataError, match="NaN"):
            load_embeddings(p)

    def test_10k_key_round_trip_byte_identical(self, tmp_path):
        # oracle: byte comparison of the re-serialized file
        rng = random.Random(3)
        table = EmbeddingTable(
            vectors={f"key {i}": tuple(rng.uniform(-2, 2) for _ in range(8))
                     for i in range(10_000)},
            dim=8,
        )
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        save_embeddings(table, a)
        loaded = load_embeddings(a)
        assert loaded.vectors == table.vectors
        save_embeddings(loaded, b)
        assert a.read_bytes() == b.read_bytes()
