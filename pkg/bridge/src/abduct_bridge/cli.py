"""Bridge command line: serve the scoring API or export embeddings."""

from __future__ import annotations

import argparse
import sys

from .embeddings import export_embeddings
from .encoders import DEFAULT_DIM, DEFAULT_ST_MODEL, get_encoder
from .service import DEFAULT_MAX_BATCH, create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abduct-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the scoring HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--backend", default="hash", choices=["hash", "st", "auto"])
    serve.add_argument("--dim", type=int, default=DEFAULT_DIM)
    serve.add_argument("--model-name", default=DEFAULT_ST_MODEL)
    serve.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)

    export = sub.add_parser("export-embeddings",
                            help="embed a sentence file into a TSV table")
    export.add_argument("input")
    export.add_argument("output")
    export.add_argument("--backend", default="hash", choices=["hash", "st", "auto"])
    export.add_argument("--dim", type=int, default=DEFAULT_DIM)
    export.add_argument("--model-name", default=DEFAULT_ST_MODEL)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        app = create_app(backend=args.backend, dim=args.dim,
                         model_name=args.model_name, max_batch=args.max_batch)
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    encoder = get_encoder(args.backend, dim=args.dim, model_name=args.model_name)
    try:
        n = export_embeddings(encoder, args.input, args.output)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {n} embeddings ({encoder.model_id}) to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
