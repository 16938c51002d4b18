"""Embedding export and its round-trip into the pipeline loader."""

from __future__ import annotations

import pytest

from abduct_bridge.embeddings import export_embeddings
from abduct_bridge.encoders import HashedNgramEncoder


class TestExportEmbeddings:
    def test_three_line_file(self, tmp_path):
        src = tmp_path / "sentences.txt"
        src.write_text("hawks eat lizards\nEvery gecko is a lizard.\nTwo squares is four.\n")
        out = tmp_path / "emb.tsv"
        n = export_embeddings(HashedNgramEncoder(dim=32), src, out)
        assert n == 3
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        assert lines[0].split("\t")[0] == "hawks eat lizards"
        assert len(lines[0].split("\t")) == 33

    def test_duplicates_collapse(self, tmp_path):
        src = tmp_path / "sentences.txt"
        src.write_text("same line\nsame line\nother line\n\nsame line\n")
        out = tmp_path / "emb.tsv"
        assert export_embeddings(HashedNgramEncoder(dim=16), src, out) == 2

    def test_empty_input_rejected(self, tmp_path):
        src = tmp_path / "sentences.txt"
        src.write_text("\n  \n")
        with pytest.raises(ValueError):
            export_embeddings(HashedNgramEncoder(dim=16), src, tmp_path / "o.tsv")

    def test_tab_in_key_rejected(self, tmp_path):
        src = tmp_path / "sentences.txt"
        src.write_text("bad\tkey\n")
        with pytest.raises(ValueError, match="tabs"):
            export_embeddings(HashedNgramEncoder(dim=16), src, tmp_path / "o.tsv")

    def test_round_trip_through_pipeline_loader(self, tmp_path):
        # the consumer contract: the file must load as a valid embedding table
        corpus_io = pytest.importorskip(
            "abduct_ir.corpus_io", reason="pipeline package not installed"
        )
        src = tmp_path / "sentences.txt"
        sentences = [f"sentence number {i} about topic {i % 3}" for i in range(40)]
        src.write_text("\n".join(sentences) + "\n")
        out = tmp_path / "emb.tsv"
        export_embeddings(HashedNgramEncoder(dim=64), src, out)
        table = corpus_io.load_embeddings(out)
        assert table.dim == 64
        assert len(table) == 40
        assert sentences[7] in table
