"""Knowledge hunting for open-book multiple-choice QA.

Retrieves open-book facts per hypothesis, abduces missing-knowledge queries,
re-ranks retrieved knowledge by information gain, and aggregates answer
scores via sum / passage-selection / weighted scoring, with all neural
scorers behind pluggable interfaces.
"""

__version__ = "0.1.0"
