"""Turn each (question, option) pair into a declarative hypothesis sentence.

Question stems come in two shapes: wh-questions ("...swoop down on what?")
and incomplete statements ("the best way to save money is ?"). A small rule
set substitutes the option text for the wh-phrase or placeholder; anything
the rules cannot handle falls back to plain concatenation. Downstream stages
only consume the hypothesis token set, so the rules aim for token coverage,
not grammatical perfection: every content word of the option always appears
in the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus_io import Question
from .text_core import TokenSet, default_stopwords

_LEADING_WH = ("what", "which", "who")
_WH_WORDS = ("what", "which", "who", "whom", "where", "when", "why", "how")


@dataclass(frozen=True)
class Hypothesis:
    question_id: str
    option_label: str
    text: str
    token_set: TokenSet
    degenerate: bool = False

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "option_label": self.option_label,
            "text": self.text,
            "tokens": list(self.token_set),
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Hypothesis":
        return cls(
            question_id=rec["question_id"],
            option_label=rec["option_label"],
            text=rec["text"],
            token_set=TokenSet.from_tokens(rec["tokens"]),
            degenerate=bool(rec.get("degenerate", False)),
        )


def _ensure_period(text: str) -> str:
    text = text.rstrip()
    while text and text[-1] in ".?!":
        text = text[:-1].rstrip()
    return text + "."


def _find_last_wh(words: list[str]) -> int:
    for i in range(len(words) - 1, -1, -1):
        if words[i].lower().strip("?") in _WH_WORDS:
            return i
    return -1


def hypothesis_text(stem: str, option_text: str) -> tuple[str, bool]:
    """Build the declarative text for one option; returns (text, degenerate)."""
    stem = stem.strip()
    opt = option_text.strip()
    if not opt:
        return stem, True

    # Blank placeholder ("___") stems.
    if "__" in stem:
        out = []
        filled = False
        for ch_run in _split_runs(stem):
            if ch_run.startswith("__"):
                out.append(opt)
                filled = True
            else:
                out.append(ch_run)
        if filled:
            return _ensure_period("".join(out)), False

    lower = stem.lower()
    # "Which of the following/these ..." selects among the options themselves.
    for lead in ("which of the following", "which of these", "which of those"):
        if lower.startswith(lead):
            rest = stem[len(lead):].lstrip()
            return _ensure_period(f"{opt} {rest}" if rest else opt), False

    words = stem.split()
    if words and words[0].lower() in _LEADING_WH:
        rest = " ".join(words[1:])
        return _ensure_period(f"{opt} {rest}" if rest else opt), False

    if stem.endswith("?"):
        # A "?" right after a function word marks an incomplete statement
        # ("... they are known as ?"): the "?" is a placeholder, and any
        # wh-word earlier in the clause is a relative pronoun, not a question.
        trailing = [w for w in words if w.strip("?")]
        last_word = trailing[-1].strip("?").lower() if trailing else ""
        wh_at = _find_last_wh(words)
        placeholder = last_word in default_stopwords() and last_word not in _WH_WORDS
        # Replace a trailing wh-phrase ("... has how many squares?"), but only
        # when the wh-word sits in the final clause.
        if not placeholder and wh_at > 0 and (
            "." not in " ".join(words[wh_at:]).rstrip("?").rstrip(".")
        ):
            prefix = " ".join(words[:wh_at])
            return _ensure_period(f"{prefix} {opt}"), False
        return _ensure_period(f"{stem[:-1].rstrip()} {opt}"), False

    # Plain concatenation fallback for incomplete-statement stems.
    return _ensure_period(f"{stem} {opt}"), False


def _split_runs(stem: str) -> list[str]:
    """Split a stem into alternating text and underscore runs."""
    runs: list[str] = []
    cur = []
    in_blank = False
    for ch in stem:
        is_blank = ch == "_"
        if cur and is_blank != in_blank:
            runs.append("".join(cur))
            cur = []
        cur.append(ch)
        in_blank = is_blank
    if cur:
        runs.append("".join(cur))
    return runs


def generate_hypotheses(
    q: Question, *, stopwords: frozenset[str] | None = None
) -> list[Hypothesis]:
    """Exactly one hypothesis per option, in the question's option order."""
    hypotheses = []
    for opt in q.options:
        text, degenerate = hypothesis_text(q.stem, opt.text)
        hypotheses.append(
            Hypothesis(
                question_id=q.id,
                option_label=opt.label,
                text=text,
                token_set=TokenSet.from_text(text, stopwords=stopwords),
                degenerate=degenerate,
            )
        )
    return hypotheses
