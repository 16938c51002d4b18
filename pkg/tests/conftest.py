from __future__ import annotations

from pathlib import Path

import pytest

from abduct_ir import corpus_io

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def questions_20():
    return corpus_io.load_questions(FIXTURES / "questions_20.jsonl")


@pytest.fixture(scope="session")
def fact_corpus():
    return corpus_io.load_facts(FIXTURES / "openbook_small.txt")


@pytest.fixture(scope="session")
def knowledge_corpus():
    return corpus_io.load_knowledge(FIXTURES / "knowledge_small.txt")
