"""Serve loop over stdio or TCP.

The server is stateless across requests and handles one request at a
time per connection; any number of connections may be open at once.
Every inbound and outbound line can be recorded to a transcript file
for later schema checking.
"""

from __future__ import annotations

import itertools
import json
import logging
import socket
import sys
import threading

from .model import CheckpointModel
from .protocol import ModelRequestError, RequestError, encode, error_response, ok_response, parse_request
from .tables import MockModel

log = logging.getLogger("dllm_adapter.server")


def resolve_model(spec: str):
    """mock:PATH loads a lookup table; anything else is a checkpoint path."""
    if spec.startswith("mock:"):
        return MockModel.load(spec[len("mock:") :])
    return CheckpointModel(spec)


class Transcript:
    """Append-only JSONL record of wire traffic, tagged by connection."""

    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def record(self, conn: int, direction: str, line: str) -> None:
        entry = {"conn": conn, "dir": direction, "line": line}
        with self._lock:
            self._fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


def handle_line(model, line: str) -> dict:
    """Map one request line to one response object, never raising.

    A malformed line earns an error response carrying whatever id could
    be recovered; a model failure earns an error response under the
    request's id.  Only the reply path itself may take the process down.
    """
    try:
        req = parse_request(line)
    except RequestError as err:
        return error_response(str(err), err.request_id)
    try:
        preds = model.predictions(req)
    except ModelRequestError as err:
        return error_response(str(err), req.id)
    except Exception as err:  # a crashing model must not kill the server
        log.exception("model failed on request %d", req.id)
        return error_response(f"model failure: {type(err).__name__}: {err}", req.id)
    return ok_response(req.id, preds)


def serve_stdio(model, transcript: Transcript | None = None) -> int:
    for raw in sys.stdin:
        line = raw.rstrip("\n")
        if transcript:
            transcript.record(0, "in", line)
        response = encode(handle_line(model, line))
        if transcript:
            transcript.record(0, "out", response)
        sys.stdout.write(response + "\n")
        sys.stdout.flush()
    return 0


def _serve_connection(model, sock, conn_id: int, transcript: Transcript | None) -> None:
    with sock:
        stream = sock.makefile("rwb")
        for raw in stream:
            # bad UTF-8 degrades to replacement characters, which fail
            # JSON parsing and earn the normal unparseable-line error
            line = raw.rstrip(b"\n").decode("utf-8", errors="replace")
            if transcript:
                transcript.record(conn_id, "in", line)
            response = encode(handle_line(model, line))
            if transcript:
                transcript.record(conn_id, "out", response)
            try:
                stream.write(response.encode("utf-8") + b"\n")
                stream.flush()
            except OSError:
                log.warning("connection %d dropped mid-reply", conn_id)
                return


def serve_tcp(model, port: int, transcript: Transcript | None = None) -> int:
    """Accept connections until killed; port 0 binds an ephemeral port.

    The bound port is announced on stdout so a parent process can
    connect without racing the bind.
    """
    server = socket.create_server(("127.0.0.1", port))
    actual = server.getsockname()[1]
    print(f"listening on {actual}", flush=True)
    counter = itertools.count(1)
    try:
        while True:
            sock, _addr = server.accept()
            threading.Thread(
                target=_serve_connection,
                args=(model, sock, next(counter), transcript),
                daemon=True,
            ).start()
    except KeyboardInterrupt:
        return 0
    finally:
        server.close()
