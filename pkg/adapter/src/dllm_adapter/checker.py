"""Schema checker for serve transcripts.

Replays a transcript and validates every outbound line against the wire
contract: well-formed JSON, correct id pairing with the request it
answers, one prediction per masked slot of that request, probabilities
in range, and EOS-argmax consistency.  Inbound lines are parsed only to
give the responses something to be checked against; a garbage request
is not a violation, but answering one with predictions is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .protocol import Request, RequestError, parse_request


@dataclass(frozen=True)
class _PendingRequest:
    line_no: int
    id: int | None
    request: Request | None  # None when the line was not a valid request


@dataclass
class CheckReport:
    requests: int = 0
    responses: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _plain_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _probability(value) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and 0.0 <= value <= 1.0
    )


def _check_error_pairing(where: str, obj: dict, ref: _PendingRequest | None, out: list[str]) -> None:
    if not isinstance(obj.get("error"), str) or not obj["error"]:
        out.append(f"{where}: error must be a non-empty string")
    if ref is None:
        return
    if ref.id is None:
        if obj.get("id") is not None:
            out.append(
                f"{where}: error for the id-less request at line {ref.line_no} "
                f"must not invent id {obj.get('id')!r}"
            )
    elif obj.get("id") != ref.id:
        out.append(
            f"{where}: error answers id {obj.get('id')!r} but the request "
            f"at line {ref.line_no} had id {ref.id}"
        )


def _check_predictions(where: str, obj: dict, ref: _PendingRequest | None, out: list[str]) -> None:
    if ref is not None and ref.request is None:
        out.append(
            f"{where}: non-error response to the invalid request at line {ref.line_no}"
        )
    if not _plain_int(obj.get("id")) or obj["id"] < 0:
        out.append(f"{where}: id must be a non-negative integer, got {obj.get('id')!r}")
    elif ref is not None and ref.id is not None and obj["id"] != ref.id:
        out.append(
            f"{where}: response answers id {obj['id']} but the request "
            f"at line {ref.line_no} had id {ref.id}"
        )
    preds = obj.get("predictions")
    if not isinstance(preds, list):
        out.append(f"{where}: predictions must be a list")
        return

    seen: set[int] = set()
    request = ref.request if ref is not None else None
    for i, item in enumerate(preds):
        spot = f"{where}, prediction {i}"
        if not isinstance(item, dict):
            out.append(f"{spot}: must be an object")
            continue
        pos = item.get("pos")
        if not _plain_int(pos) or pos < 0:
            out.append(f"{spot}: pos must be a non-negative integer, got {pos!r}")
            continue
        if pos in seen:
            out.append(f"{spot}: duplicate position {pos}")
        seen.add(pos)
        if not _plain_int(item.get("top_token")) or item["top_token"] < 0:
            out.append(f"{spot}: top_token must be a non-negative integer")
            continue
        if not _probability(item.get("top_prob")) or not _probability(item.get("eos_prob")):
            out.append(f"{spot}: probabilities must lie in [0, 1]")
            continue
        if (
            request is not None
            and item["top_token"] == request.eos_id
            and item["eos_prob"] > item["top_prob"]
        ):
            out.append(
                f"{spot}: EOS argmax with eos_prob {item['eos_prob']} "
                f"above top_prob {item['top_prob']}"
            )

    if request is not None:
        expected = set(request.masked_slots())
        missing = sorted(expected - seen)
        extra = sorted(seen - expected)
        if missing:
            out.append(f"{where}: no prediction for masked slots {missing}")
        if extra:
            out.append(f"{where}: predictions for non-masked positions {extra}")


def check_transcript(path) -> CheckReport:
    report = CheckReport()
    pending: dict[int, list[_PendingRequest]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line_no, raw in enumerate(lines, start=1):
        try:
            entry = json.loads(raw)
        except json.JSONDecodeError:
            report.violations.append(f"line {line_no}: transcript entry is not valid JSON")
            continue
        if (
            not isinstance(entry, dict)
            or not _plain_int(entry.get("conn"))
            or entry.get("dir") not in ("in", "out")
            or not isinstance(entry.get("line"), str)
        ):
            report.violations.append(
                f"line {line_no}: transcript entry must have conn, dir and line fields"
            )
            continue
        conn = entry["conn"]
        if entry["dir"] == "in":
            report.requests += 1
            try:
                req = parse_request(entry["line"])
                pending.setdefault(conn, []).append(_PendingRequest(line_no, req.id, req))
            except RequestError as err:
                pending.setdefault(conn, []).append(
                    _PendingRequest(line_no, err.request_id, None)
                )
            continue

        report.responses += 1
        where = f"line {line_no}"
        queue = pending.get(conn, [])
        ref = queue.pop(0) if queue else None
        if ref is None:
            report.violations.append(f"{where}: response with no outstanding request")
        try:
            obj = json.loads(entry["line"])
        except json.JSONDecodeError:
            report.violations.append(f"{where}: response is not valid JSON")
            continue
        if not isinstance(obj, dict):
            report.violations.append(f"{where}: response must be a JSON object")
            continue
        if "error" in obj:
            _check_error_pairing(where, obj, ref, report.violations)
        else:
            _check_predictions(where, obj, ref, report.violations)

    for conn, queue in sorted(pending.items()):
        for ref in queue:
            report.violations.append(
                f"request at line {ref.line_no} (connection {conn}) was never answered"
            )
    return report
