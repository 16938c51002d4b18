"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
ScorerError -> 3. StageError wraps any failure with the stage name and the
(question_id, option_label) being processed when it happened.
"""

from __future__ import annotations


class AbductIrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AbductIrError):
    """Invalid configuration: bad value, missing path, unknown scorer name."""


class DataError(AbductIrError):
    """Malformed or invariant-violating input data."""


class ScorerError(AbductIrError):
    """A similarity or answer scorer failed (remote timeout, missing key, ...)."""


class StageError(AbductIrError):
    """A pipeline stage failed while processing one (question, option) item."""

    def __init__(self, stage: str, question_id: str, option_label: str, cause: Exception):
        self.stage = stage
        self.question_id = question_id
        self.option_label = option_label
        self.cause = cause
        super().__init__(
            f"stage {stage!r} failed at question_id={question_id!r} "
            f"option_label={option_label!r}: {cause}"
        )
