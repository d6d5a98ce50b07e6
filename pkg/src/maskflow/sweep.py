"""Benchmark sweeps: Cartesian grids of runs over a task suite.

A sweep spec is a JSON object with a task suite path, an "axes" mapping
from setting names to value lists, and optional "base" settings shared
by every cell.  Each cell runs the whole suite and contributes one row
of mean metrics to the summary CSV.  Failures inside a cell are counted
and logged but never stop the sweep.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

from .config import (
    DEFAULT_PRESET,
    PRESETS,
    DecodeConfig,
    EFactorFamily,
    EFactorSpec,
    Signal,
    Strategy,
)
from .core import ConfigError, Vocabulary
from .metrics import write_trace
from .oracles import NoiseProfile, NoisyOracle, ScriptedOracle, exact_match, load_suite
from .strategies import RunStatus, TwoStageConfig, run

log = logging.getLogger("maskflow.sweep")

DEFAULT_VOCAB_SIZE = 256
DEFAULT_MASK_ID = 0
DEFAULT_EOS_ID = 1

SUMMARY_COLUMNS = [
    "strategy",
    "signal",
    "l_init",
    "rho_low",
    "rho_high",
    "efactor",
    "acc_proxy",
    "e_token",
    "n_token",
    "e_ratio",
    "steps",
    "adjust_events",
    "wall_ms",
]

# Every setting a sweep axis or base entry may use.  The same keys drive
# the CLI, so the two front ends cannot drift apart.
KNOWN_SETTINGS = {
    "strategy",
    "signal",
    "preset",
    "rho_low",
    "rho_high",
    "l_init",
    "l_max",
    "tau_high",
    "n_max_adjust",
    "efactor",
    "base_increment",
    "linear_gain",
    "exp_gain",
    "count_only_adjustments",
    "seed",
    "noise_temperature",
    "noise_eos_bias",
    "noise_eos_cutoff",
    "block_size",
    "stage1_max_rounds",
    "trailing_eos_threshold",
    "vocab_size",
    "mask_id",
    "eos_id",
}


def resolve_thresholds(settings: dict) -> tuple[float, float]:
    """Explicit rho keys win over a preset; the preset fills the rest."""
    preset = settings.get("preset", DEFAULT_PRESET)
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose one of {sorted(PRESETS)}")
    low, high = PRESETS[preset]
    return settings.get("rho_low", low), settings.get("rho_high", high)


def config_from_settings(settings: dict) -> DecodeConfig:
    unknown = set(settings) - KNOWN_SETTINGS
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    rho_low, rho_high = resolve_thresholds(settings)
    efactor = EFactorSpec(
        family=EFactorFamily(settings.get("efactor", EFactorFamily.CONSTANT.value)),
        base_increment=settings.get("base_increment", EFactorSpec().base_increment),
        linear_gain=settings.get("linear_gain", EFactorSpec().linear_gain),
        exp_gain=settings.get("exp_gain", EFactorSpec().exp_gain),
    )
    defaults = DecodeConfig()
    return DecodeConfig(
        l_init=settings.get("l_init", defaults.l_init),
        l_max=settings.get("l_max", defaults.l_max),
        rho_low=rho_low,
        rho_high=rho_high,
        tau_high=settings.get("tau_high", defaults.tau_high),
        n_max_adjust=settings.get("n_max_adjust", defaults.n_max_adjust),
        efactor=efactor,
        signal=Signal(settings.get("signal", defaults.signal.value)),
        strategy=Strategy(settings.get("strategy", defaults.strategy.value)),
        count_only_adjustments=bool(settings.get("count_only_adjustments", False)),
        seed=settings.get("seed", defaults.seed),
    )


def two_stage_from_settings(settings: dict) -> TwoStageConfig:
    base = TwoStageConfig()
    return TwoStageConfig(
        trailing_eos_conf_threshold=settings.get(
            "trailing_eos_threshold", base.trailing_eos_conf_threshold
        ),
        block_size=settings.get("block_size", base.block_size),
        stage1_max_rounds=settings.get("stage1_max_rounds", base.stage1_max_rounds),
    )


def noise_from_settings(settings: dict) -> NoiseProfile | None:
    temp = settings.get("noise_temperature", 0.0)
    bias = settings.get("noise_eos_bias", 0.0)
    cutoff = settings.get("noise_eos_cutoff", 0.0)
    if temp == 0.0 and bias == 0.0:
        return None
    return NoiseProfile(
        temperature=temp,
        eos_bias_early=bias,
        eos_bias_cutoff=cutoff,
        rng_seed=settings.get("seed", 0),
    )


def vocab_from_settings(settings: dict) -> Vocabulary:
    return Vocabulary(
        size=settings.get("vocab_size", DEFAULT_VOCAB_SIZE),
        mask_id=settings.get("mask_id", DEFAULT_MASK_ID),
        eos_id=settings.get("eos_id", DEFAULT_EOS_ID),
    )


def provider_for_task(task, vocab, settings: dict, task_index: int):
    """Scripted oracle, or its noisy variant when the settings ask for noise.

    Each task gets its own noise stream, offset from the base seed by the
    task index, so suite runs are independent but reproducible.
    """
    profile = noise_from_settings(settings)
    if profile is None:
        return ScriptedOracle(task, vocab)
    profile = NoiseProfile(
        temperature=profile.temperature,
        eos_bias_early=profile.eos_bias_early,
        eos_bias_cutoff=profile.eos_bias_cutoff,
        rng_seed=profile.rng_seed + task_index,
    )
    return NoisyOracle(task, vocab, profile)


# ---------------------------------------------------------------------------
# Sweep execution

def load_sweep_spec(path) -> dict:
    path = Path(path)
    spec = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(spec, dict):
        raise ConfigError("sweep spec must be a JSON object")
    if "suite" not in spec:
        raise ConfigError("sweep spec needs a 'suite' entry pointing at a task file")
    axes = spec.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigError("'axes' must map setting names to value lists")
    for key, values in axes.items():
        if key not in KNOWN_SETTINGS:
            raise ConfigError(f"unknown sweep axis {key!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axis {key!r} must be a non-empty list of values")
    base = spec.get("base", {})
    unknown = set(base) - KNOWN_SETTINGS
    if unknown:
        raise ConfigError(f"unknown base settings: {sorted(unknown)}")
    spec.setdefault("axes", {})
    spec.setdefault("base", {})
    # Remember where the spec lives so the suite path can be relative.
    spec["_dir"] = str(path.parent)
    return spec


def expand_cells(spec: dict) -> list[dict]:
    axes = spec["axes"]
    keys = list(axes.keys())
    cells = []
    for combo in product(*(axes[k] for k in keys)):
        cell = dict(spec["base"])
        cell.update(dict(zip(keys, combo)))
        cells.append(cell)
    return cells if cells else [dict(spec["base"])]


def run_cell(settings: dict, tasks, cell_index: int, trace_dir=None) -> dict:
    """Run the whole suite under one cell's settings and average the results."""
    cfg = config_from_settings(settings)
    vocab = vocab_from_settings(settings)
    ts = two_stage_from_settings(settings)

    matches = 0
    failures = 0
    sums = {"e_token": 0.0, "n_token": 0.0, "e_ratio": 0.0, "steps": 0.0, "adjust_events": 0.0, "wall_ms": 0.0}
    completed = 0
    for j, task in enumerate(tasks):
        try:
            provider = provider_for_task(task, vocab, settings, j)
            result = run(cfg, provider, task.prompt, vocab, ts)
        except Exception as err:  # a broken run must not sink the sweep
            log.warning("cell %d task %d failed: %s", cell_index, j, err)
            failures += 1
            continue
        if trace_dir is not None:
            write_trace(result.trace, Path(trace_dir) / f"cell{cell_index:03d}_task{j:03d}.jsonl")
        if result.status is not RunStatus.COMPLETE:
            log.warning("cell %d task %d aborted: %s", cell_index, j, result.abort_reason)
            failures += 1
            continue
        completed += 1
        if exact_match(result.final_state, task, vocab):
            matches += 1
        m = result.metrics
        sums["e_token"] += m.e_token
        sums["n_token"] += m.n_token
        sums["e_ratio"] += m.e_ratio
        sums["steps"] += m.steps_total
        sums["adjust_events"] += m.adjust_events
        sums["wall_ms"] += m.wall_time * 1000.0

    means = {k: (v / completed if completed else math.nan) for k, v in sums.items()}
    return {
        "strategy": cfg.strategy.value,
        "signal": cfg.signal.value,
        "l_init": cfg.l_init,
        "rho_low": cfg.rho_low,
        "rho_high": cfg.rho_high,
        "efactor": cfg.efactor.family.value,
        "acc_proxy": matches / len(tasks),
        "e_token": means["e_token"],
        "n_token": means["n_token"],
        "e_ratio": means["e_ratio"],
        "steps": means["steps"],
        "adjust_events": means["adjust_events"],
        "wall_ms": means["wall_ms"],
        "_failures": failures,
    }


def _cell_worker(args):
    settings, tasks, index, trace_dir = args
    return index, run_cell(settings, tasks, index, trace_dir)


def _format_value(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def write_summary_csv(rows: list[dict], path) -> None:
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in SUMMARY_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def comparable_summary_bytes(path) -> bytes:
    """Summary CSV content with the wall-clock column removed.

    Reruns of a seeded sweep are byte-identical through this view; raw
    files differ only in wall_ms.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    keep = [i for i, name in enumerate(header) if name != "wall_ms"]
    out = []
    for line in lines:
        cells = line.split(",")
        out.append(",".join(cells[i] for i in keep))
    return ("\n".join(out) + "\n").encode("utf-8")


def run_sweep(spec: dict, out_dir, workers: int = 1, write_traces: bool = False) -> Path:
    """Execute every cell of a loaded sweep spec; returns the CSV path.

    Cells run in spec order regardless of worker count, and the summary
    rows are written in that order, so reruns with the same seed produce
    identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suite_path = Path(spec["_dir"]) / spec["suite"] if spec.get("_dir") else Path(spec["suite"])
    tasks = load_suite(suite_path)
    if not tasks:
        raise ConfigError(f"task suite {suite_path} is empty")
    cells = expand_cells(spec)
    for cell in cells:
        config_from_settings(cell)  # fail fast on a bad grid before any run

    trace_dir = None
    if write_traces:
        trace_dir = out_dir / "traces"
        trace_dir.mkdir(exist_ok=True)
        trace_dir = str(trace_dir)

    rows: list[dict | None] = [None] * len(cells)
    if workers > 1:
        jobs = [(cell, tasks, i, trace_dir) for i, cell in enumerate(cells)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(_cell_worker, jobs):
                rows[index] = row
    else:
        for i, cell in enumerate(cells):
            rows[i] = run_cell(cell, tasks, i, trace_dir)

    total_failures = sum(r["_failures"] for r in rows)
    if total_failures:
        log.warning("sweep finished with %d failed runs", total_failures)
    csv_path = out_dir / "summary.csv"
    write_summary_csv(rows, csv_path)
    return csv_path
