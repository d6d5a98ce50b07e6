"""Line-protocol client for external model servers.

One request per line of UTF-8 JSON, one response per line back.  A
request carries the full token buffer with masked slots encoded as the
mask id, plus the prompt length and the two special ids, so a server can
answer statelessly.  Responses either echo the request id with one
prediction per masked slot or report an error.  Ids increase strictly
within a session; after a timeout the request is retried under a fresh
id and any late answer to the old id is discarded.

Two transports share the framing: a child process spoken to over
stdin/stdout, and a TCP connection.
"""

from __future__ import annotations

import json
import queue
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass

from .core import ConfigError, SequenceState, Vocabulary, masked_positions
from .kernel import PositionPrediction, ProviderError


@dataclass(frozen=True)
class BridgeConfig:
    command: str | None = None  # child-process server, parsed with shlex
    address: str | None = None  # "host:port" of a running server
    request_timeout: float = 10.0
    max_retries: int = 2

    def __post_init__(self):
        if (self.command is None) == (self.address is None):
            raise ConfigError("exactly one of command or address must be set")
        if self.request_timeout <= 0:
            raise ConfigError(f"request_timeout must be positive, got {self.request_timeout}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")


class _LineReader(threading.Thread):
    """Pumps lines from a blocking stream into a queue.

    The queue carries bytes lines and a final None once the stream ends,
    which lets the consumer apply its own timeout without racing the
    blocking read.
    """

    def __init__(self, stream):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines: queue.Queue = queue.Queue()
        self.start()

    def run(self):
        try:
            for line in self.stream:
                self.lines.put(line)
        except Exception:
            pass
        self.lines.put(None)


class BridgeProvider:
    """PredictionProvider backed by a line-protocol model server."""

    def __init__(self, cfg: BridgeConfig, vocab: Vocabulary):
        self.cfg = cfg
        self.vocab = vocab
        self._next_id = 0
        self._eof = False
        self._proc = None
        self._sock = None
        if cfg.command is not None:
            self._proc = subprocess.Popen(
                shlex.split(cfg.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
            self._reader = _LineReader(self._proc.stdout)
        else:
            host, _, port = cfg.address.rpartition(":")
            if not host:
                raise ConfigError(f"address must look like host:port, got {cfg.address!r}")
            self._sock = socket.create_connection((host, int(port)), timeout=cfg.request_timeout)
            self._sock.settimeout(None)
            self._reader = _LineReader(self._sock.makefile("rb"))

    # -- transport ---------------------------------------------------------

    def _send(self, payload: dict) -> None:
        data = (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")
        try:
            if self._proc is not None:
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
            else:
                self._sock.sendall(data)
        except (BrokenPipeError, OSError) as err:
            raise ProviderError(f"could not send request to model server: {err}") from err

    def _recv(self, deadline: float) -> bytes:
        if self._eof:
            raise ProviderError("model server closed the connection")
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError
        try:
            line = self._reader.lines.get(timeout=remaining)
        except queue.Empty:
            raise TimeoutError from None
        if line is None:
            self._eof = True
            raise ProviderError("model server closed the connection")
        return line

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- protocol ----------------------------------------------------------

    def predict(self, state: SequenceState) -> list[PositionPrediction]:
        masked = masked_positions(state)
        tokens = list(state.prompt) + [
            self.vocab.mask_id if slot is None else slot for slot in state.gen
        ]
        attempts = 0
        while True:
            rid = self._next_id
            self._next_id += 1
            self._send(
                {
                    "id": rid,
                    "tokens": tokens,
                    "prompt_len": len(state.prompt),
                    "mask_id": self.vocab.mask_id,
                    "eos_id": self.vocab.eos_id,
                }
            )
            try:
                response = self._await_response(rid)
            except TimeoutError:
                attempts += 1
                if attempts > self.cfg.max_retries:
                    raise ProviderError(
                        f"model server did not answer request {rid} within "
                        f"{self.cfg.request_timeout}s ({attempts} attempts)"
                    ) from None
                continue
            return self._validate(response, masked, state)

    def _await_response(self, rid: int) -> dict:
        deadline = time.monotonic() + self.cfg.request_timeout
        while True:
            line = self._recv(deadline)
            try:
                obj = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as err:
                raise ProviderError(f"model server sent an unparseable line: {err}") from err
            got = obj.get("id")
            if isinstance(got, int) and got < rid:
                continue  # late answer to a request we already gave up on
            if got != rid:
                raise ProviderError(f"model server answered id {got!r}, expected {rid}")
            if "error" in obj:
                raise ProviderError(f"model server reported an error: {obj['error']}")
            return obj

    def _validate(self, obj: dict, masked: list[int], state: SequenceState) -> list[PositionPrediction]:
        preds = obj.get("predictions")
        if not isinstance(preds, list):
            raise ProviderError("response is missing the predictions list")
        if len(preds) != len(masked):
            raise ProviderError(
                f"response has {len(preds)} predictions for {len(masked)} masked slots"
            )
        expected = set(masked)
        out = []
        for item in preds:
            try:
                pos = item["pos"]
                top_token = item["top_token"]
                top_prob = float(item["top_prob"])
                eos_prob = float(item["eos_prob"])
            except (KeyError, TypeError, ValueError) as err:
                raise ProviderError(f"malformed prediction object: {item!r} ({err})") from err
            if pos not in expected:
                raise ProviderError(f"prediction for position {pos} does not match a masked slot")
            expected.discard(pos)
            if not 0 <= top_token < self.vocab.size:
                raise ProviderError(f"top_token {top_token} is outside the vocabulary")
            if not 0.0 <= top_prob <= 1.0 or not 0.0 <= eos_prob <= 1.0:
                raise ProviderError(
                    f"probabilities out of range at pos {pos}: top={top_prob}, eos={eos_prob}"
                )
            out.append(PositionPrediction(pos, top_token, top_prob, eos_prob))
        out.sort(key=lambda p: p.pos)
        return out
