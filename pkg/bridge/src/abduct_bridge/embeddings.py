"""Export sentence embeddings to the pipeline's TSV table format.

One vector per input line, keyed by the exact line text; duplicates collapse
to a single key. The output loads directly into the pipeline's embedding
table reader (``key TAB float ... float``, uniform dimension).
"""

from __future__ import annotations

from pathlib import Path

from .encoders import Encoder


def export_embeddings(encoder: Encoder, input_path: str | Path,
                      output_path: str | Path) -> int:
    """Returns the number of unique keys written."""
    keys: list[str] = []
    seen: set[str] = set()
    with open(input_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                raise ValueError(f"{input_path}:{lineno}: tabs cannot appear in keys")
            if line not in seen:
                seen.add(line)
                keys.append(line)
    if not keys:
        raise ValueError(f"{input_path}: no sentences to embed")

    vectors = encoder.encode(keys)
    with open(output_path, "w", encoding="utf-8") as fh:
        for key, vec in zip(keys, vectors):
            fh.write(key + "\t" + "\t".join(repr(float(x)) for x in vec) + "\n")
    return len(keys)
