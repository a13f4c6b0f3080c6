"""Sidecar entry points: `clipsidecar serve` and `clipsidecar export`."""

from __future__ import annotations

import argparse
import os
import sys

from .backends import load_backend
from .export import DEFAULT_PROMPT_PREFIX, batch_export
from .service import ADDR_ENV, DEFAULT_ADDR, create_app


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    addr = args.addr or os.environ.get(ADDR_ENV, DEFAULT_ADDR)
    host, _, port = addr.partition(":")
    uvicorn.run(create_app(args.model), host=host, port=int(port or 8477))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    backend = load_backend(args.model)
    failures = batch_export(
        args.manifest, args.out, backend, prompt_prefix=args.prompt_prefix
    )
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="clipsidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP embedding service")
    p_serve.add_argument("--addr", default=None, help=f"host:port (default ${ADDR_ENV} or {DEFAULT_ADDR})")
    p_serve.add_argument("--model", default=None, help="model id or 'hash'")
    p_serve.set_defaults(func=cmd_serve)

    p_export = sub.add_parser("export", help="embed a manifest into an EBAE file")
    p_export.add_argument("--manifest", required=True)
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--model", default=None, help="model id or 'hash'")
    p_export.add_argument("--prompt-prefix", default=DEFAULT_PROMPT_PREFIX)
    p_export.set_defaults(func=cmd_export)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
