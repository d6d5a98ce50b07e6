import pytest

from maskflow import SequenceState, ScriptedTask, Vocabulary


# Session scope keeps the fixture usable inside @given tests; the value
# is frozen so sharing it is safe.
@pytest.fixture(scope="session")
def vocab() -> Vocabulary:
    return Vocabulary(size=256, mask_id=0, eos_id=1)


def make_task(target_len: int, prompt=(7, 8), first_token: int = 10) -> ScriptedTask:
    """Task whose target cycles through regular token ids (>= 2)."""
    target = tuple(first_token + (i % 200) for i in range(target_len))
    return ScriptedTask(tuple(prompt), target)


def state_from_tokens(tokens, prompt=()) -> SequenceState:
    """Build a state from a list where None marks a masked slot."""
    return SequenceState(tuple(prompt), list(tokens))
