"""Length adjustment: when to grow or shrink the buffer, and by how much.

The controller compares a signal reading against the equilibrium band
[rho_low, rho_high].  Below the band the sequence looks too short and is
expanded; above it the tail looks like padding and trailing masked slots
are removed.  Decoded slots are never touched: the decision layer clamps
contraction to the trailing masked run, so the application layer treats
any attempt to remove a committed token as a broken invariant, not an
error to recover from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .config import DecodeConfig, EFactorFamily, EFactorSpec
from .core import MASKED, SequenceState, trailing_mask_count


class ActionKind(str, Enum):
    HOLD = "hold"  # reading inside the band, no change
    EXPAND = "expand"
    CONTRACT = "contract"
    FROZEN = "frozen"  # adjustment disabled: budget spent or length at a bound


@dataclass(frozen=True, slots=True)
class LengthAction:
    kind: ActionKind
    magnitude: int = 0


def efactor(spec: EFactorSpec, value: float, rho_low: float, rho_high: float) -> int:
    """Adjustment magnitude for a signal reading.

    Inside the band the magnitude is zero.  Outside it, the normalised
    distance to the nearer edge scales the base increment according to
    the spec's family.  The distance is 0 just outside the band and 1 at
    the extreme reading (0 below, 1 above).
    """
    if value < rho_low:
        distance = (rho_low - value) / rho_low
    elif value > rho_high:
        distance = (value - rho_high) / (1.0 - rho_high)
    else:
        return 0

    if spec.family is EFactorFamily.CONSTANT:
        return spec.base_increment
    if spec.family is EFactorFamily.LINEAR:
        return math.ceil(spec.base_increment * (1.0 + spec.linear_gain * distance))
    return math.ceil(spec.base_increment * spec.exp_gain**distance)


def decide_action(reading_value: float, state: SequenceState, cfg: DecodeConfig, n_adjust_used: int) -> LengthAction:
    """Pick the length action for the current step.

    Adjustment is enabled only while the budget has headroom and the
    current length sits strictly between 0 and l_max; at a bound the
    controller freezes rather than adjust in either direction.  Expansion
    is clamped so the buffer never exceeds l_max, contraction so it never
    reaches into decoded slots.
    """
    if n_adjust_used >= cfg.n_max_adjust:
        return LengthAction(ActionKind.FROZEN)
    if not 0 < state.l_cur < cfg.l_max:
        return LengthAction(ActionKind.FROZEN)
    if cfg.rho_low <= reading_value <= cfg.rho_high:
        return LengthAction(ActionKind.HOLD)

    raw = efactor(cfg.efactor, reading_value, cfg.rho_low, cfg.rho_high)
    if reading_value < cfg.rho_low:
        magnitude = min(raw, cfg.l_max - state.l_cur)
        if magnitude < 1:
            return LengthAction(ActionKind.FROZEN)
        return LengthAction(ActionKind.EXPAND, magnitude)

    magnitude = min(raw, trailing_mask_count(state))
    if magnitude < 1:
        # Nothing removable at the tail; treat as settled rather than frozen.
        return LengthAction(ActionKind.HOLD)
    return LengthAction(ActionKind.CONTRACT, magnitude)


def apply_action(state: SequenceState, action: LengthAction) -> None:
    if action.kind is ActionKind.EXPAND:
        state.gen.extend([MASKED] * action.magnitude)
    elif action.kind is ActionKind.CONTRACT:
        if action.magnitude < 1:
            return
        tail = state.gen[-action.magnitude :]
        if any(slot is not MASKED for slot in tail):
            raise RuntimeError(
                "contraction would remove a decoded slot; the decision layer must prevent this"
            )
        del state.gen[-action.magnitude :]
    # HOLD and FROZEN change nothing.
