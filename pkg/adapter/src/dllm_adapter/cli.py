"""Command-line front end: serve a model, or check a serve transcript.

Set DLLM_ADAPTER_LOG=debug (or info, warning) for diagnostics on
stderr; stdout stays reserved for protocol traffic in stdio mode.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .checker import check_transcript
from .protocol import AdapterStartupError
from .server import Transcript, resolve_model, serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dllm-adapter",
        description="Line-protocol model server for masked diffusion decoding engines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="answer prediction requests until EOF or kill")
    p_serve.add_argument(
        "--model",
        required=True,
        help="mock:TABLE.json for a lookup table, or a checkpoint path",
    )
    p_serve.add_argument(
        "--transport",
        default="stdio",
        help="stdio, or tcp:PORT (port 0 binds an ephemeral port and announces it)",
    )
    p_serve.add_argument(
        "--transcript",
        default=None,
        help="append every wire line to this JSONL file for later checking",
    )

    p_check = sub.add_parser("check", help="validate a serve transcript against the wire schema")
    p_check.add_argument("transcript", help="transcript JSONL file written by serve")
    return parser


def cmd_serve(args, parser) -> int:
    if args.transport != "stdio" and not args.transport.startswith("tcp:"):
        parser.error(f"transport must be stdio or tcp:PORT, got {args.transport!r}")
    try:
        model = resolve_model(args.model)
    except AdapterStartupError as err:
        print(f"startup error: {err}", file=sys.stderr)
        return 1

    transcript = Transcript(args.transcript) if args.transcript else None
    try:
        if args.transport == "stdio":
            return serve_stdio(model, transcript)
        try:
            port = int(args.transport[len("tcp:") :])
        except ValueError:
            parser.error(f"transport must be stdio or tcp:PORT, got {args.transport!r}")
        try:
            return serve_tcp(model, port, transcript)
        except OSError as err:
            print(f"startup error: could not bind tcp port {port}: {err}", file=sys.stderr)
            return 1
    finally:
        if transcript:
            transcript.close()


def cmd_check(args) -> int:
    try:
        report = check_transcript(args.transcript)
    except OSError as err:
        print(f"could not read transcript: {err}", file=sys.stderr)
        return 1
    for violation in report.violations:
        print(violation)
    print(
        f"{len(report.violations)} violations in {report.responses} responses "
        f"({report.requests} requests)"
    )
    return 0 if report.ok else 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("DLLM_ADAPTER_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args, parser)
    if args.command == "check":
        return cmd_check(args)
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
