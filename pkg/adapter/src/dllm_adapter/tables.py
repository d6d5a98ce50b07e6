"""Mock model backed by a per-position lookup table.

The table file is JSON with a positions list and a default entry: slot
i of the generation region answers with positions[i] when present and
with the default otherwise.  The shape matches the decoding engine's
lookup-table oracle files, so a single file can drive both sides of a
conformance comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .protocol import AdapterStartupError, ModelRequestError, Request


@dataclass(frozen=True)
class TableEntry:
    top_token: int
    top_prob: float
    eos_prob: float


def _load_entry(data, where: str) -> TableEntry:
    if not isinstance(data, dict):
        raise AdapterStartupError(f"{where} must be an object, got {type(data).__name__}")
    try:
        top_token = data["top_token"]
        top_prob = float(data["top_prob"])
        eos_prob = float(data["eos_prob"])
    except (KeyError, TypeError, ValueError) as err:
        raise AdapterStartupError(f"{where} is malformed: {err}") from err
    if not isinstance(top_token, int) or isinstance(top_token, bool) or top_token < 0:
        raise AdapterStartupError(f"{where}: top_token must be a non-negative integer")
    if not 0.0 <= top_prob <= 1.0 or not 0.0 <= eos_prob <= 1.0:
        raise AdapterStartupError(
            f"{where}: probabilities must lie in [0, 1], got top={top_prob}, eos={eos_prob}"
        )
    return TableEntry(top_token, top_prob, eos_prob)


class MockModel:
    """Answers requests from the table instead of a forward pass."""

    def __init__(self, positions: list[TableEntry], default: TableEntry):
        self.positions = list(positions)
        self.default = default

    @classmethod
    def load(cls, path) -> "MockModel":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise AdapterStartupError(f"could not read table file {path}: {err}") from err
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise AdapterStartupError(f"table file {path} is not valid JSON: {err}") from err
        if not isinstance(data, dict) or "positions" not in data or "default" not in data:
            raise AdapterStartupError(
                f"table file {path} must be an object with positions and default"
            )
        if not isinstance(data["positions"], list):
            raise AdapterStartupError(f"table file {path}: positions must be a list")
        entries = [
            _load_entry(e, f"table entry {i}") for i, e in enumerate(data["positions"])
        ]
        default = _load_entry(data["default"], "table default entry")
        return cls(entries, default)

    def predictions(self, req: Request) -> list[dict]:
        out = []
        for slot in req.masked_slots():
            entry = self.positions[slot] if slot < len(self.positions) else self.default
            # consistency depends on the request's eos id, so it cannot
            # be checked at load time
            if entry.top_token == req.eos_id and entry.eos_prob > entry.top_prob:
                raise ModelRequestError(
                    f"table entry for slot {slot} is inconsistent under eos id "
                    f"{req.eos_id}: eos_prob {entry.eos_prob} exceeds top_prob {entry.top_prob}"
                )
            out.append(
                {
                    "pos": slot,
                    "top_token": entry.top_token,
                    "top_prob": entry.top_prob,
                    "eos_prob": entry.eos_prob,
                }
            )
        return out
