"""Vocabulary handles and partially decoded sequence state.

A generation buffer is an immutable prompt followed by a growable region
of slots.  Each slot either holds a committed token id or is still masked
(stored as None).  Every length-accounting question in the rest of the
package goes through the helpers here.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """A run configuration or vocabulary failed validation."""


@dataclass(frozen=True)
class Vocabulary:
    """Token id space plus the two ids the decoder treats specially."""

    size: int
    mask_id: int
    eos_id: int

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigError(f"vocabulary size must be positive, got {self.size}")
        for name in ("mask_id", "eos_id"):
            tok = getattr(self, name)
            if not 0 <= tok < self.size:
                raise ConfigError(f"{name}={tok} is outside a vocabulary of size {self.size}")
        if self.mask_id == self.eos_id:
            raise ConfigError("mask_id and eos_id must be distinct token ids")


# Slot marker for a position that has not been committed yet.  Kept as a
# named constant so intent reads at call sites; the underlying value is None.
MASKED = None


@dataclass
class SequenceState:
    """Prompt plus generation slots; masked slots hold MASKED.

    The generation region stays contiguous after the prompt: expansion
    appends slots at the end, contraction removes trailing slots, and a
    committed slot never reverts to masked.
    """

    prompt: tuple[int, ...]
    gen: list[int | None] = field(default_factory=list)

    @property
    def l_cur(self) -> int:
        return len(self.gen)

    def clone(self) -> "SequenceState":
        return SequenceState(self.prompt, list(self.gen))


def new_sequence(prompt, l_init: int, vocab: Vocabulary) -> SequenceState:
    """Fresh state: the prompt followed by l_init masked slots."""
    if l_init < 1:
        raise ConfigError(f"initial generation length must be at least 1, got {l_init}")
    prompt = tuple(prompt)
    for tok in prompt:
        if not 0 <= tok < vocab.size:
            raise ConfigError(f"prompt token {tok} is outside a vocabulary of size {vocab.size}")
    return SequenceState(prompt=prompt, gen=[MASKED] * l_init)


def remaining_mask_count(state: SequenceState) -> int:
    return sum(1 for slot in state.gen if slot is MASKED)


def masked_positions(state: SequenceState) -> list[int]:
    """Generation-region indices that are still masked, ascending."""
    return [i for i, slot in enumerate(state.gen) if slot is MASKED]


def trailing_mask_count(state: SequenceState) -> int:
    """Length of the run of masked slots at the very end of the buffer."""
    count = 0
    for slot in reversed(state.gen):
        if slot is not MASKED:
            break
        count += 1
    return count
