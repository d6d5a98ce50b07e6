"""Per-step records, run summaries, and the JSONL trace format.

A trace file is one JSON object per line: a header echoing the effective
configuration, one object per step record, and a footer with the final
metrics.  Writing is deterministic for deterministic inputs; wall-clock
time lives only in the footer and is the one field excluded when two
traces are compared for equality.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .config import Signal
from .core import MASKED, SequenceState
from .length_control import ActionKind


@dataclass(frozen=True, slots=True)
class StepRecord:
    step: int
    remaining_masks_pre: int
    signal_value: float
    signal_kind: Signal
    action: ActionKind
    magnitude: int
    decoded_count: int
    l_cur_post: int


@dataclass(frozen=True, slots=True)
class MetricsReport:
    e_token: int
    n_token: int
    e_ratio: float
    steps_total: int
    adjust_events: int
    wall_time: float
    partial: bool = False


@dataclass
class RunTrace:
    header: dict
    records: list[StepRecord]
    footer: dict


def effective_tokens(state: SequenceState, eos_id: int) -> int:
    """Number of generated tokens that are not trailing EOS padding.

    EOS tokens in the interior count as content; only the unbroken run at
    the very end is padding.  Undefined while masked slots remain.
    """
    end = len(state.gen)
    for slot in state.gen:
        if slot is MASKED:
            raise ValueError("effective token count is undefined while masked slots remain")
    while end > 0 and state.gen[end - 1] == eos_id:
        end -= 1
    return end


def _effective_tokens_partial(state: SequenceState, eos_id: int) -> int:
    # Aborted runs still get a best-effort count; an unresolved slot is
    # treated as content because it is not known to be padding.
    end = len(state.gen)
    while end > 0 and state.gen[end - 1] == eos_id:
        end -= 1
    return end


def summarize(
    state: SequenceState,
    records: list[StepRecord],
    eos_id: int,
    wall_time: float,
    partial: bool = False,
) -> MetricsReport:
    if partial:
        e_token = _effective_tokens_partial(state, eos_id)
    else:
        e_token = effective_tokens(state, eos_id)
    n_token = state.l_cur
    adjust_events = sum(
        1 for r in records if r.action in (ActionKind.EXPAND, ActionKind.CONTRACT)
    )
    return MetricsReport(
        e_token=e_token,
        n_token=n_token,
        e_ratio=e_token / n_token if n_token else 0.0,
        steps_total=len(records),
        adjust_events=adjust_events,
        wall_time=wall_time,
        partial=partial,
    )


# ---------------------------------------------------------------------------
# Trace serialisation

def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def write_trace(trace: RunTrace, path) -> None:
    lines = [_dump({"type": "header", **trace.header})]
    for r in trace.records:
        row = asdict(r)
        row["signal_kind"] = r.signal_kind.value
        row["action"] = r.action.value
        lines.append(_dump({"type": "step", **row}))
    lines.append(_dump({"type": "footer", **trace.footer}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_line(i: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as err:
        raise ValueError(f"trace line {i}: not valid JSON ({err.msg})") from err
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"trace line {i}: expected an object with a 'type' field")
    return obj


def read_trace(path) -> RunTrace:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("trace file is empty")

    first = _parse_line(1, lines[0])
    if first.pop("type") != "header":
        raise ValueError("trace line 1: expected the header record")

    records = []
    footer = None
    for i, line in enumerate(lines[1:], start=2):
        obj = _parse_line(i, line)
        kind = obj.pop("type")
        if kind == "step":
            try:
                records.append(
                    StepRecord(
                        step=obj["step"],
                        remaining_masks_pre=obj["remaining_masks_pre"],
                        signal_value=obj["signal_value"],
                        signal_kind=Signal(obj["signal_kind"]),
                        action=ActionKind(obj["action"]),
                        magnitude=obj["magnitude"],
                        decoded_count=obj["decoded_count"],
                        l_cur_post=obj["l_cur_post"],
                    )
                )
            except (KeyError, ValueError) as err:
                raise ValueError(f"trace line {i}: malformed step record ({err})") from err
        elif kind == "footer":
            if i != len(lines):
                raise ValueError(f"trace line {i}: footer before end of file")
            footer = obj
        else:
            raise ValueError(f"trace line {i}: unknown record type {kind!r}")
    if footer is None:
        raise ValueError("trace file is truncated: no footer record")
    return RunTrace(header=first, records=records, footer=footer)


def comparable_trace_bytes(path) -> bytes:
    """Trace file content with the footer's wall time neutralised.

    Byte-level comparisons between reruns go through this helper because
    wall-clock time is the one legitimately nondeterministic field.
    """
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.splitlines()
    out = []
    for line in lines:
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("type") == "footer":
            obj.pop("wall_time", None)
            line = json.dumps(obj, separators=(",", ":"))
        out.append(line)
    return ("\n".join(out) + "\n").encode("utf-8")


def metrics_to_footer(report: MetricsReport) -> dict:
    return {
        "e_token": report.e_token,
        "n_token": report.n_token,
        "e_ratio": report.e_ratio,
        "steps_total": report.steps_total,
        "adjust_events": report.adjust_events,
        "wall_time": report.wall_time,
        "partial": report.partial,
    }
