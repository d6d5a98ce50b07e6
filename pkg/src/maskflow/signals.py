"""Sequence-level readings that drive the length controller.

Both readings summarise the prediction snapshot for the still-masked
slots.  The density reading counts how many of those slots would decode
to EOS right now; the confidence reading averages the EOS probability
mass instead, which is cheaper to trust and easier to fool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import Signal
from .kernel import PositionPrediction


@dataclass(frozen=True, slots=True)
class SignalReading:
    value: float
    kind: Signal
    remaining_masks: int
    implicit_eos_count: int


def implicit_eos_density(predictions: list[PositionPrediction], eos_id: int) -> SignalReading:
    """Fraction of masked slots whose argmax is the EOS token."""
    if not predictions:
        raise ValueError("implicit EOS density is undefined for an empty prediction set")
    hits = sum(1 for p in predictions if p.top_token == eos_id)
    return SignalReading(
        value=hits / len(predictions),
        kind=Signal.DENSITY,
        remaining_masks=len(predictions),
        implicit_eos_count=hits,
    )


def mean_eos_confidence(predictions: list[PositionPrediction]) -> SignalReading:
    """Arithmetic mean of the EOS probability over masked slots.

    Uses an exactly rounded sum so the reading does not depend on the
    order the provider listed its predictions in.
    """
    if not predictions:
        raise ValueError("mean EOS confidence is undefined for an empty prediction set")
    total = math.fsum(p.eos_prob for p in predictions)
    return SignalReading(
        value=total / len(predictions),
        kind=Signal.CONFIDENCE,
        remaining_masks=len(predictions),
        implicit_eos_count=0,
    )


def read_signal(kind: Signal, predictions: list[PositionPrediction], eos_id: int) -> SignalReading:
    if kind is Signal.DENSITY:
        return implicit_eos_density(predictions, eos_id)
    if kind is Signal.CONFIDENCE:
        return mean_eos_confidence(predictions)
    raise ValueError(f"unknown signal kind: {kind!r}")
