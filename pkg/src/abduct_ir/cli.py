"""Command-line entry point.

One subcommand per pipeline stage plus ``run`` (everything) and ``grid``
(sweep n_facts / n_knowledge and emit one report row per combination).
Flags mirror config-file keys one-to-one; a flag given on the command line
overrides the config file value.

Exit codes: 0 success, 1 config error, 2 data error, 3 scorer/remote error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from . import pipeline
from .errors import ConfigError, DataError, ScorerError, StageError
from .pipeline import PipelineConfig


def _csv_ints(value: str) -> list[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {value!r}") from exc


_PATH_KEYS = (
    "questions", "facts", "knowledge", "embeddings", "stopwords",
    "bow_probs", "gen_candidates", "out_dir",
)
_STR_KEYS = (
    "fact_scorer", "knowledge_scorer", "sts_scorer", "answer_scorer",
    "rerank_sim", "index_mode", "abduction_model", "remote_url",
)
_INT_KEYS = (
    "n_facts", "n_knowledge", "pool_m", "top_k", "max_tokens",
    "samples_per_q", "seed", "parallelism",
)
_FLOAT_KEYS = ("theta", "bow_sim_threshold")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    for key in _PATH_KEYS + _STR_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key)
    for key in _INT_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
    for key in _FLOAT_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    parser.add_argument("--grid-n", dest="grid_n", type=_csv_ints)
    parser.add_argument("--grid-k", dest="grid_k", type=_csv_ints)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    keys = {f.name for f in fields(PipelineConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in keys and v is not None}
    if args.config:
        return PipelineConfig.from_file(args.config, overrides)
    return PipelineConfig(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abduct-ir",
        description="Knowledge-hunting pipeline for open-book multiple-choice QA",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("hypothesize", "generate per-option hypotheses"),
        ("retrieve-facts", "retrieve top-N open-book facts per hypothesis"),
        ("gen-sts-pairs", "emit similarity-model training pairs"),
        ("abduce", "build missing-knowledge queries"),
        ("gen-bow-data", "emit bag-of-words classifier training data"),
        ("retrieve-knowledge", "retrieve candidate knowledge pools"),
        ("rerank", "information-gain re-rank knowledge pools"),
        ("answer", "score passages and choose answers"),
        ("evaluate", "compute accuracy and gold-fact hit counts"),
        ("run", "run the full pipeline"),
        ("grid", "sweep n_facts/n_knowledge and report each combination"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        _add_config_flags(sp)
    return parser


def _dispatch(command: str, config: PipelineConfig) -> None:
    config.validate(for_run=command in ("run", "grid"))
    if command == "hypothesize":
        out = pipeline.stage_hypothesize(config)
        print(f"wrote {len(out)} hypotheses to {config.stage_path('hypotheses')}")
    elif command == "retrieve-facts":
        out = pipeline.stage_retrieve_facts(config)
        print(f"wrote fact retrievals for {len(out)} (question, option) pairs")
    elif command == "gen-sts-pairs":
        out = pipeline.stage_gen_sts_pairs(config)
        print(f"wrote {len(out)} training pairs to {config.stage_path('sts_pairs')}")
    elif command == "abduce":
        out = pipeline.stage_abduce(config)
        print(f"wrote {len(out)} queries to {config.stage_path('queries')}")
    elif command == "gen-bow-data":
        out = pipeline.stage_gen_bow_data(config)
        print(f"wrote {len(out)} labeled words to {config.stage_path('bow_train')}")
    elif command == "retrieve-knowledge":
        out = pipeline.stage_retrieve_knowledge(config)
        print(f"wrote {len(out)} candidate pools")
    elif command == "rerank":
        out = pipeline.stage_rerank(config)
        print(f"re-ranked {len(out)} pools into {config.stage_path('knowledge')}")
    elif command == "answer":
        out = pipeline.stage_answer(config)
        print(f"wrote {len(out)} predictions to {config.stage_path('predictions')}")
    elif command == "evaluate":
        report = pipeline.stage_evaluate(config)
        print(pipeline.render_report_text(report, config), end="")
    elif command == "run":
        _, report = pipeline.run_pipeline(config)
        print(pipeline.render_report_text(report, config), end="")
    elif command == "grid":
        report = pipeline.run_grid(config)
        print(pipeline.render_report_text(report, config), end="")
    else:  # pragma: no cover - argparse rejects unknown commands
        raise ConfigError(f"unknown command {command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        _dispatch(args.command, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        code = 3 if isinstance(exc.cause, ScorerError) else 2
        print(f"error: {exc}", file=sys.stderr)
        return code
    except ScorerError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
