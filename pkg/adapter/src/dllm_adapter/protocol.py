"""Wire contract shared by the serve loop and the transcript checker.

Both directions carry one JSON object per line.  A request holds the
full token buffer with masked slots encoded as the mask id, plus the
prompt length and the two special ids, so the server never needs
session state.  A response either echoes the request id with one
prediction per masked slot, or reports an error; when a line cannot be
parsed far enough to recover an id, the error object carries no id at
all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class AdapterStartupError(RuntimeError):
    """The configured model cannot be brought up at all."""


class ModelRequestError(RuntimeError):
    """The model could not answer one request; the server stays alive."""


class RequestError(ValueError):
    """A structurally invalid request line.

    Carries the request id when one could be recovered from the line,
    so the error reply can still be correlated by the client.
    """

    def __init__(self, message: str, request_id: int | None = None):
        super().__init__(message)
        self.request_id = request_id


@dataclass(frozen=True)
class Request:
    id: int
    tokens: tuple[int, ...]
    prompt_len: int
    mask_id: int
    eos_id: int

    @property
    def gen_tokens(self) -> tuple[int, ...]:
        return self.tokens[self.prompt_len :]

    def masked_slots(self) -> list[int]:
        """Indices of the generation slots awaiting predictions.

        Positions count from the start of the generation region, not
        from the start of the token buffer.
        """
        return [i for i, tok in enumerate(self.gen_tokens) if tok == self.mask_id]


def _plain_int(value) -> bool:
    # bool is an int subclass; True must not pass as an id or token
    return isinstance(value, int) and not isinstance(value, bool)


def recover_id(obj) -> int | None:
    """Best-effort id extraction from an arbitrary parsed line."""
    if isinstance(obj, dict) and _plain_int(obj.get("id")) and obj["id"] >= 0:
        return obj["id"]
    return None


def parse_request(line: str) -> Request:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as err:
        raise RequestError(f"unparseable request line: {err}") from err
    if not isinstance(obj, dict):
        raise RequestError("request must be a JSON object")
    rid = recover_id(obj)
    if "id" not in obj:
        raise RequestError("request is missing an id")
    if rid is None:
        raise RequestError("request id must be a non-negative integer")

    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not all(_plain_int(t) and t >= 0 for t in tokens):
        raise RequestError("tokens must be a list of non-negative integers", rid)
    prompt_len = obj.get("prompt_len")
    if not _plain_int(prompt_len) or not 0 <= prompt_len <= len(tokens):
        raise RequestError(
            f"prompt_len must be an integer in [0, {len(tokens)}], got {prompt_len!r}", rid
        )
    mask_id = obj.get("mask_id")
    eos_id = obj.get("eos_id")
    if not _plain_int(mask_id) or mask_id < 0:
        raise RequestError("mask_id must be a non-negative integer", rid)
    if not _plain_int(eos_id) or eos_id < 0:
        raise RequestError("eos_id must be a non-negative integer", rid)
    if mask_id == eos_id:
        raise RequestError("mask_id and eos_id must differ", rid)
    return Request(
        id=rid,
        tokens=tuple(tokens),
        prompt_len=prompt_len,
        mask_id=mask_id,
        eos_id=eos_id,
    )


def ok_response(request_id: int, predictions: list[dict]) -> dict:
    return {"id": request_id, "predictions": predictions}


def error_response(message: str, request_id: int | None) -> dict:
    if request_id is None:
        return {"error": message}
    return {"id": request_id, "error": message}


def encode(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))
