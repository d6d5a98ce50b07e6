"""One denoising step: per-slot predictions and the commit rule.

Providers summarise a model's output distribution per masked slot as the
argmax token with its probability plus the probability of the EOS token
at that slot.  The commit rule writes every high-confidence prediction
into the buffer; when nothing clears the threshold it commits the single
best slot so a step always makes progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .core import MASKED, SequenceState, Vocabulary, masked_positions


class ProviderError(RuntimeError):
    """A prediction provider failed or returned unusable output."""


@dataclass(slots=True)
class PositionPrediction:
    pos: int  # index into the generation region, not the full token buffer
    top_token: int
    top_prob: float
    eos_prob: float


class PredictionProvider(Protocol):
    def predict(self, state: SequenceState) -> list[PositionPrediction]: ...


@dataclass(slots=True)
class StepOutcome:
    decoded: list[tuple[int, int]]  # (pos, token) pairs committed this step
    predictions: list[PositionPrediction]  # pre-commit snapshot, pos ascending


def predict(provider: PredictionProvider, state: SequenceState, vocab: Vocabulary) -> list[PositionPrediction]:
    """Query the provider and validate coverage of the masked slots.

    Returns predictions sorted by position.  Any provider exception and
    any coverage defect is re-raised as ProviderError so a run can abort
    with a uniform diagnostic.
    """
    masked = masked_positions(state)
    if not masked:
        raise ValueError("predict called on a state with no masked slots")
    try:
        raw = provider.predict(state)
    except ProviderError:
        raise
    except Exception as err:
        raise ProviderError(f"provider raised {type(err).__name__}: {err}") from err

    if len(raw) != len(masked):
        raise ProviderError(
            f"provider returned {len(raw)} predictions for {len(masked)} masked slots"
        )
    preds = sorted(raw, key=lambda p: p.pos)
    for p, pos in zip(preds, masked):
        if p.pos != pos:
            raise ProviderError(
                f"prediction positions do not match masked slots: got {p.pos}, expected {pos}"
            )
        if p.top_token == vocab.eos_id and p.eos_prob > p.top_prob:
            raise ProviderError(
                f"inconsistent prediction at pos {p.pos}: "
                f"eos_prob {p.eos_prob} exceeds top_prob {p.top_prob} for an EOS argmax"
            )
    return preds


def decode_step(state: SequenceState, predictions: list[PositionPrediction], tau_high: float) -> StepOutcome:
    """Commit predictions into the buffer.

    Every prediction with top_prob strictly above tau_high is written.
    If none clears the threshold, the single highest-probability slot is
    written instead (ties resolved to the lowest position), so the masked
    count strictly decreases on every call.
    """
    decoded: list[tuple[int, int]] = []
    for p in predictions:
        if p.top_prob > tau_high:
            decoded.append((p.pos, p.top_token))
    if not decoded:
        best = max(predictions, key=lambda p: (p.top_prob, -p.pos))
        decoded.append((best.pos, best.top_token))

    for pos, token in decoded:
        if state.gen[pos] is not MASKED:
            raise RuntimeError(f"slot {pos} was already decoded; a slot is never committed twice")
        state.gen[pos] = token
    return StepOutcome(decoded=decoded, predictions=predictions)
