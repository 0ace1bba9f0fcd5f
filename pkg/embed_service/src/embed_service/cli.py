"""CLI: `embed-service serve` runs the HTTP sidecar, `embed-service
embed-file` precomputes an embedding file for the client's file provider."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import MockBackend, ModelBackend, write_embedding_file


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="sentence-embedding model reference to load")
    parser.add_argument("--mock", action="store_true", help="deterministic mock instead of a model")
    parser.add_argument("--seed", type=int, default=0, help="mock seed (default 0)")
    parser.add_argument("--dim", type=int, default=8, help="mock dimension (default 8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-service")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the embedding HTTP service")
    serve.add_argument("--port", type=int, default=8011)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--max-batch", type=int, default=32)
    _model_flags(serve)

    batch = sub.add_parser("embed-file", help="precompute an embedding file")
    batch.add_argument("--input", type=Path, required=True, help="one text per line")
    batch.add_argument("--output", type=Path, required=True)
    _model_flags(batch)

    return parser


def make_backend(args):
    if args.mock:
        return MockBackend(dim=args.dim, seed=args.seed)
    if not args.model:
        print("error: give --model or --mock", file=sys.stderr)
        raise SystemExit(2)
    try:
        return ModelBackend(args.model)
    except Exception as e:
        print(f"error: cannot load model {args.model!r}: {e}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    backend = make_backend(args)

    if args.command == "serve":
        import uvicorn

        from .app import create_app

        app = create_app(backend, max_batch=args.max_batch)
        print(f"serving {backend.model_name} (dim {backend.dim}) on {args.host}:{args.port}")
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    if args.command == "embed-file":
        try:
            texts = args.input.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            print(f"error: cannot read {args.input}: {e.strerror}", file=sys.stderr)
            return 3
        count = write_embedding_file(texts, backend, args.output)
        print(f"wrote {count} vectors (dim {backend.dim}) -> {args.output}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
