"""Synthetic prediction providers with known answers.

The scripted oracle fixes a target sequence and answers every masked
slot inside the target region with the target token and every slot past
it with EOS, always at high confidence.  The noisy variant perturbs
those answers with seeded noise and can overstate EOS probability early
in a run, which is the failure mode that separates the density signal
from the confidence signal.  The table oracle replays a per-position
lookup table and exists so that external model servers can be checked
against an in-process reference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MASKED, SequenceState, Vocabulary
from .kernel import PositionPrediction, ProviderError

# Confidence levels of the scripted answer.  Content slots keep a tiny
# EOS share so the confidence signal is never exactly zero.
SCRIPTED_TOP_PROB = 0.99
SCRIPTED_CONTENT_EOS_PROB = 0.005

# A flipped slot's chance is this fraction of the early EOS bias.
EOS_FLIP_RATE = 0.5

STANDARD_SUITE_SEED = 20240817
STANDARD_SUITE_SIZE = 50


@dataclass(frozen=True)
class ScriptedTask:
    prompt: tuple[int, ...]
    target: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prompt", tuple(self.prompt))
        object.__setattr__(self, "target", tuple(self.target))

    @property
    def target_len(self) -> int:
        return len(self.target)


def validate_task(task: ScriptedTask, vocab: Vocabulary) -> None:
    if not task.target:
        raise ValueError("task target must not be empty")
    for tok in task.prompt:
        if not 0 <= tok < vocab.size:
            raise ValueError(f"prompt token {tok} outside vocabulary of size {vocab.size}")
    for tok in task.target:
        if not 0 <= tok < vocab.size:
            raise ValueError(f"target token {tok} outside vocabulary of size {vocab.size}")
        if tok == vocab.mask_id or tok == vocab.eos_id:
            raise ValueError("target must not contain the mask or EOS token id")


class ScriptedOracle:
    """Deterministic provider that knows the answer."""

    def __init__(self, task: ScriptedTask, vocab: Vocabulary):
        validate_task(task, vocab)
        self.task = task
        self.vocab = vocab

    def predict(self, state: SequenceState) -> list[PositionPrediction]:
        if state.prompt != self.task.prompt:
            raise ProviderError(
                f"state prompt {state.prompt!r} does not match the scripted task prompt"
            )
        target = self.task.target
        eos = self.vocab.eos_id
        out = []
        for i, slot in enumerate(state.gen):
            if slot is not MASKED:
                continue
            if i < len(target):
                out.append(PositionPrediction(i, target[i], SCRIPTED_TOP_PROB, SCRIPTED_CONTENT_EOS_PROB))
            else:
                out.append(PositionPrediction(i, eos, SCRIPTED_TOP_PROB, SCRIPTED_TOP_PROB))
        return out


@dataclass(frozen=True)
class NoiseProfile:
    """Seeded perturbation of the scripted answers.

    temperature scales a uniform draw subtracted from every top_prob, so
    higher temperature spreads commits over more steps.  While the
    decoded fraction of the buffer is below eos_bias_cutoff, eos_prob is
    inflated by eos_bias_early and content slots flip their argmax to
    EOS with probability EOS_FLIP_RATE * eos_bias_early.
    """

    temperature: float = 0.0
    eos_bias_early: float = 0.0
    eos_bias_cutoff: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.eos_bias_early < 0:
            raise ValueError(f"eos_bias_early must be >= 0, got {self.eos_bias_early}")
        if not 0.0 <= self.eos_bias_cutoff <= 1.0:
            raise ValueError(f"eos_bias_cutoff must be in [0, 1], got {self.eos_bias_cutoff}")
        if self.rng_seed < 0:
            raise ValueError(f"rng_seed must be >= 0, got {self.rng_seed}")


def _state_digest(state: SequenceState) -> int:
    h = hashlib.blake2b(digest_size=8)
    arr = np.fromiter(
        (tok for tok in state.prompt),
        dtype=np.int64,
        count=len(state.prompt),
    )
    h.update(arr.tobytes())
    gen = np.fromiter(
        (-1 if slot is MASKED else slot for slot in state.gen),
        dtype=np.int64,
        count=len(state.gen),
    )
    h.update(gen.tobytes())
    return int.from_bytes(h.digest(), "little")


class NoisyOracle:
    """Scripted answers plus seeded noise and an early EOS overstatement.

    The draw for a given state depends only on (rng_seed, state), so two
    calls with the same state return identical predictions and a rerun
    with the same seed reproduces the whole trajectory.
    """

    def __init__(self, task: ScriptedTask, vocab: Vocabulary, profile: NoiseProfile):
        self.inner = ScriptedOracle(task, vocab)
        self.vocab = vocab
        self.profile = profile

    def predict(self, state: SequenceState) -> list[PositionPrediction]:
        base = self.inner.predict(state)
        prof = self.profile
        n = len(base)
        if n == 0:
            return base
        rng = np.random.default_rng(
            np.random.SeedSequence([prof.rng_seed, _state_digest(state)])
        )
        temp_draws = rng.random(n)
        flip_draws = rng.random(n)

        decoded_fraction = (state.l_cur - n) / state.l_cur
        early = decoded_fraction < prof.eos_bias_cutoff
        flip_prob = EOS_FLIP_RATE * prof.eos_bias_early
        eos = self.vocab.eos_id

        out = []
        for i, p in enumerate(base):
            top_token = p.top_token
            top_prob = max(0.001, p.top_prob - prof.temperature * temp_draws[i])
            eos_prob = p.eos_prob
            if early and prof.eos_bias_early > 0:
                eos_prob = min(1.0, eos_prob + prof.eos_bias_early)
                if top_token != eos and flip_draws[i] < flip_prob:
                    top_token = eos
                    top_prob = eos_prob
            if top_token == eos:
                eos_prob = min(eos_prob, top_prob)
            out.append(PositionPrediction(p.pos, top_token, top_prob, eos_prob))
        return out


@dataclass(frozen=True)
class TableEntry:
    top_token: int
    top_prob: float
    eos_prob: float


class TableOracle:
    """Replays one fixed prediction per generation index.

    Index i answers positions[i] when inside the table, otherwise the
    default entry.  Decoded context never changes the answer, which makes
    the behaviour expressible as a plain JSON file and lets an external
    server be compared against this in-process reference.
    """

    def __init__(self, positions: list[TableEntry], default: TableEntry):
        self.positions = list(positions)
        self.default = default

    def predict(self, state: SequenceState) -> list[PositionPrediction]:
        out = []
        for i, slot in enumerate(state.gen):
            if slot is not MASKED:
                continue
            entry = self.positions[i] if i < len(self.positions) else self.default
            out.append(PositionPrediction(i, entry.top_token, entry.top_prob, entry.eos_prob))
        return out


def table_for_task(task: ScriptedTask, vocab: Vocabulary) -> dict:
    """Lookup-table equivalent of the scripted oracle, as plain JSON data."""
    return {
        "positions": [
            {"top_token": tok, "top_prob": SCRIPTED_TOP_PROB, "eos_prob": SCRIPTED_CONTENT_EOS_PROB}
            for tok in task.target
        ],
        "default": {
            "top_token": vocab.eos_id,
            "top_prob": SCRIPTED_TOP_PROB,
            "eos_prob": SCRIPTED_TOP_PROB,
        },
    }


def load_table(path) -> TableOracle:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = [TableEntry(e["top_token"], e["top_prob"], e["eos_prob"]) for e in data["positions"]]
    d = data["default"]
    return TableOracle(entries, TableEntry(d["top_token"], d["top_prob"], d["eos_prob"]))


# ---------------------------------------------------------------------------
# Task suites

def load_suite(path) -> list[ScriptedTask]:
    """Read a task suite: a JSON list of {"prompt": [...], "target": [...]}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"task suite must be a JSON list, got {type(data).__name__}")
    tasks = []
    for i, item in enumerate(data):
        try:
            tasks.append(ScriptedTask(tuple(item["prompt"]), tuple(item["target"])))
        except (KeyError, TypeError) as err:
            raise ValueError(f"task {i} is malformed: {err}") from err
    return tasks


def save_suite(tasks: list[ScriptedTask], path) -> None:
    data = [{"prompt": list(t.prompt), "target": list(t.target)} for t in tasks]
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def _regular_token(rng: np.random.Generator, vocab: Vocabulary) -> int:
    # Draw uniformly from the vocabulary minus the two reserved ids.
    lo, hi = sorted((vocab.mask_id, vocab.eos_id))
    tok = int(rng.integers(0, vocab.size - 2))
    if tok >= lo:
        tok += 1
    if tok >= hi:
        tok += 1
    return tok


def generate_suite(
    vocab: Vocabulary,
    count: int,
    seed: int,
    dist: str = "normal",
    mean: float = 200.0,
    std: float = 80.0,
    min_len: int = 8,
    max_len: int = 480,
    prompt_len: int = 4,
) -> list[ScriptedTask]:
    """Random tasks with configurable target-length distribution.

    dist is one of "normal" (mean/std, clipped to [min_len, max_len]),
    "uniform" (min_len..max_len inclusive), or "fixed" (every target has
    length round(mean)).
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 1 <= min_len <= max_len:
        raise ValueError(f"need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    rng = np.random.default_rng(seed)
    tasks = []
    for _ in range(count):
        if dist == "normal":
            length = int(round(rng.normal(mean, std)))
        elif dist == "uniform":
            length = int(rng.integers(min_len, max_len + 1))
        elif dist == "fixed":
            length = int(round(mean))
        else:
            raise ValueError(f"unknown target-length distribution: {dist!r}")
        length = max(min_len, min(max_len, length))
        prompt = tuple(_regular_token(rng, vocab) for _ in range(prompt_len))
        target = tuple(_regular_token(rng, vocab) for _ in range(length))
        tasks.append(ScriptedTask(prompt, target))
    return tasks


def standard_suite(vocab: Vocabulary) -> list[ScriptedTask]:
    """The fixed 50-task suite used by the benchmark comparisons.

    Target lengths are centred at 200 with heavy spread, so short and
    long completions are both represented.
    """
    return generate_suite(vocab, STANDARD_SUITE_SIZE, STANDARD_SUITE_SEED)


def exact_match(state: SequenceState, task: ScriptedTask, vocab: Vocabulary) -> bool:
    """True when the fully decoded content region equals the target.

    The content region is everything before the trailing EOS run.  A
    state that still contains masked slots never matches.
    """
    if any(slot is MASKED for slot in state.gen):
        return False
    end = len(state.gen)
    while end > 0 and state.gen[end - 1] == vocab.eos_id:
        end -= 1
    return tuple(state.gen[:end]) == task.target
