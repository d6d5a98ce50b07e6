"""The three decoding loops: fixed-length, adaptive, and two-stage.

All three share the same skeleton: query the provider, take a signal
reading, commit tokens, and append a step record.  They differ in what
happens to the buffer length.  The fixed loop never touches it.  The
adaptive loop consults the length controller every iteration and can
both grow and shrink the tail.  The two-stage loop first grows the fully
masked buffer until the trailing block looks like EOS, then decodes,
inserting masks whenever confidence stalls; it never shrinks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

from .config import DecodeConfig, Strategy
from .core import (
    ConfigError,
    SequenceState,
    Vocabulary,
    new_sequence,
    remaining_mask_count,
)
from .kernel import PredictionProvider, ProviderError, decode_step, predict
from .length_control import ActionKind, LengthAction, apply_action, decide_action
from .metrics import MetricsReport, RunTrace, StepRecord, metrics_to_footer, summarize
from .signals import read_signal


class RunStatus(str, Enum):
    COMPLETE = "complete"
    ABORTED = "aborted"


@dataclass(frozen=True)
class TwoStageConfig:
    """Knobs specific to the two-stage baseline.

    Stage one keeps appending block_size masks until the mean confidence
    of EOS-argmax predictions in the trailing block clears the threshold
    (or the round cap is hit).  Stage two reuses the main config and
    spends the shared adjustment budget on mask insertions.
    """

    trailing_eos_conf_threshold: float = 0.9
    block_size: int = 64
    stage1_max_rounds: int = 32

    def __post_init__(self):
        if not 0.0 <= self.trailing_eos_conf_threshold <= 1.0:
            raise ConfigError(
                f"trailing_eos_conf_threshold must be in [0, 1], got {self.trailing_eos_conf_threshold}"
            )
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")
        if self.stage1_max_rounds < 0:
            raise ConfigError(f"stage1_max_rounds must be >= 0, got {self.stage1_max_rounds}")


@dataclass
class RunResult:
    final_state: SequenceState
    trace: RunTrace
    metrics: MetricsReport
    status: RunStatus
    abort_reason: str | None = None


def config_echo(cfg: DecodeConfig, two_stage: TwoStageConfig | None = None) -> dict:
    """Header dictionary recording the effective configuration of a run."""
    echo = {
        "strategy": cfg.strategy.value,
        "signal": cfg.signal.value,
        "l_init": cfg.l_init,
        "l_max": cfg.l_max,
        "rho_low": cfg.rho_low,
        "rho_high": cfg.rho_high,
        "tau_high": cfg.tau_high,
        "n_max_adjust": cfg.n_max_adjust,
        "efactor": cfg.efactor.family.value,
        "base_increment": cfg.efactor.base_increment,
        "linear_gain": cfg.efactor.linear_gain,
        "exp_gain": cfg.efactor.exp_gain,
        "count_only_adjustments": cfg.count_only_adjustments,
        "seed": cfg.seed,
    }
    if two_stage is not None:
        echo["two_stage"] = {
            "trailing_eos_conf_threshold": two_stage.trailing_eos_conf_threshold,
            "block_size": two_stage.block_size,
            "stage1_max_rounds": two_stage.stage1_max_rounds,
        }
    return echo


def _finish(header, state, records, vocab, wall, status, reason=None) -> RunResult:
    report = summarize(state, records, vocab.eos_id, wall, partial=status is not RunStatus.COMPLETE)
    trace = RunTrace(header=header, records=list(records), footer=metrics_to_footer(report))
    return RunResult(final_state=state, trace=trace, metrics=report, status=status, abort_reason=reason)


def _record(records, reading, action: LengthAction, decoded_count: int, state: SequenceState) -> None:
    records.append(
        StepRecord(
            step=len(records),
            remaining_masks_pre=reading.remaining_masks,
            signal_value=reading.value,
            signal_kind=reading.kind,
            action=action.kind,
            magnitude=action.magnitude,
            decoded_count=decoded_count,
            l_cur_post=state.l_cur,
        )
    )


def _check_bound(records, cfg):
    # Every loop below decodes at least one token per iteration unless the
    # iteration spends adjustment budget, so this can only fire on a bug.
    if len(records) >= cfg.l_max + cfg.n_max_adjust:
        raise RuntimeError(
            f"decoding exceeded its termination bound of {cfg.l_max + cfg.n_max_adjust} iterations"
        )


_NO_ACTION = LengthAction(ActionKind.HOLD, 0)


def run_fixed(cfg: DecodeConfig, provider: PredictionProvider, prompt, vocab: Vocabulary) -> RunResult:
    """Decode a buffer of l_init slots without ever adjusting its length."""
    state = new_sequence(prompt, cfg.l_init, vocab)
    header = config_echo(cfg)
    records: list[StepRecord] = []
    t0 = time.perf_counter()
    try:
        while remaining_mask_count(state) > 0:
            _check_bound(records, cfg)
            preds = predict(provider, state, vocab)
            reading = read_signal(cfg.signal, preds, vocab.eos_id)
            outcome = decode_step(state, preds, cfg.tau_high)
            _record(records, reading, _NO_ACTION, len(outcome.decoded), state)
    except ProviderError as err:
        return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.ABORTED, str(err))
    return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.COMPLETE)


def run_rho_eos(cfg: DecodeConfig, provider: PredictionProvider, prompt, vocab: Vocabulary) -> RunResult:
    """Single-stage decoding with bidirectional length adjustment.

    Each iteration takes the signal reading on the pre-commit snapshot,
    commits tokens, then lets the controller act on the post-commit
    state.  The adjustment budget is spent per iteration by default, or
    per expand/contract event with cfg.count_only_adjustments.
    """
    state = new_sequence(prompt, cfg.l_init, vocab)
    header = config_echo(cfg)
    records: list[StepRecord] = []
    n_used = 0
    t0 = time.perf_counter()
    try:
        while remaining_mask_count(state) > 0:
            _check_bound(records, cfg)
            preds = predict(provider, state, vocab)
            reading = read_signal(cfg.signal, preds, vocab.eos_id)
            outcome = decode_step(state, preds, cfg.tau_high)
            action = decide_action(reading.value, state, cfg, n_used)
            apply_action(state, action)
            if cfg.count_only_adjustments:
                if action.kind in (ActionKind.EXPAND, ActionKind.CONTRACT):
                    n_used += 1
            else:
                n_used += 1
            _record(records, reading, action, len(outcome.decoded), state)
    except ProviderError as err:
        return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.ABORTED, str(err))
    return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.COMPLETE)


def run_two_stage(
    cfg: DecodeConfig,
    provider: PredictionProvider,
    prompt,
    vocab: Vocabulary,
    two_stage: TwoStageConfig | None = None,
) -> RunResult:
    """Expand-first baseline: grow until the tail reads as EOS, then decode.

    Both stages draw on the same n_max_adjust budget, so the total number
    of length adjustments stays bounded regardless of how the rounds are
    split between them.
    """
    ts = two_stage if two_stage is not None else TwoStageConfig()
    state = new_sequence(prompt, cfg.l_init, vocab)
    header = config_echo(cfg, ts)
    records: list[StepRecord] = []
    n_used = 0
    t0 = time.perf_counter()
    try:
        # Stage one: length calibration on the fully masked buffer.
        for _ in range(ts.stage1_max_rounds):
            if n_used >= cfg.n_max_adjust or state.l_cur >= cfg.l_max:
                break
            preds = predict(provider, state, vocab)
            reading = read_signal(cfg.signal, preds, vocab.eos_id)
            block_lo = state.l_cur - min(ts.block_size, state.l_cur)
            tail_eos = [p for p in preds if p.pos >= block_lo and p.top_token == vocab.eos_id]
            conf = sum(p.top_prob for p in tail_eos) / len(tail_eos) if tail_eos else 0.0
            if conf >= ts.trailing_eos_conf_threshold:
                break
            action = LengthAction(ActionKind.EXPAND, min(ts.block_size, cfg.l_max - state.l_cur))
            apply_action(state, action)
            n_used += 1
            _record(records, reading, action, 0, state)

        # Stage two: confidence decoding with insertion instead of forcing.
        while remaining_mask_count(state) > 0:
            _check_bound(records, cfg)
            preds = predict(provider, state, vocab)
            reading = read_signal(cfg.signal, preds, vocab.eos_id)
            stalled = not any(p.top_prob > cfg.tau_high for p in preds)
            if stalled and n_used < cfg.n_max_adjust and state.l_cur < cfg.l_max:
                action = LengthAction(ActionKind.EXPAND, min(ts.block_size, cfg.l_max - state.l_cur))
                apply_action(state, action)
                n_used += 1
                _record(records, reading, action, 0, state)
                continue
            outcome = decode_step(state, preds, cfg.tau_high)
            _record(records, reading, _NO_ACTION, len(outcome.decoded), state)
    except ProviderError as err:
        return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.ABORTED, str(err))
    return _finish(header, state, records, vocab, time.perf_counter() - t0, RunStatus.COMPLETE)


def run(
    cfg: DecodeConfig,
    provider: PredictionProvider,
    prompt,
    vocab: Vocabulary,
    two_stage: TwoStageConfig | None = None,
) -> RunResult:
    """Dispatch on cfg.strategy; rejects unknown strategies up front."""
    if cfg.strategy is Strategy.FIXED:
        return run_fixed(cfg, provider, prompt, vocab)
    if cfg.strategy is Strategy.RHO_EOS:
        return run_rho_eos(cfg, provider, prompt, vocab)
    if cfg.strategy is Strategy.TWO_STAGE:
        return run_two_stage(cfg, provider, prompt, vocab, two_stage)
    raise ConfigError(f"unknown strategy: {cfg.strategy!r}")
