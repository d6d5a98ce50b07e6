"""Variable-length decoding for masked diffusion language models.

The package separates what a model says (PredictionProvider implementations:
scripted and noisy oracles, lookup tables, the line-protocol bridge) from
what the decoder does with it (fixed-length, adaptive, and two-stage
strategies built on a shared kernel, signal, and length-controller stack).
"""

from .bridge import BridgeConfig, BridgeProvider
from .config import (
    DecodeConfig,
    EFactorFamily,
    EFactorSpec,
    PRESETS,
    Signal,
    Strategy,
)
from .core import (
    ConfigError,
    MASKED,
    SequenceState,
    Vocabulary,
    masked_positions,
    new_sequence,
    remaining_mask_count,
    trailing_mask_count,
)
from .kernel import (
    PositionPrediction,
    PredictionProvider,
    ProviderError,
    StepOutcome,
    decode_step,
    predict,
)
from .length_control import ActionKind, LengthAction, apply_action, decide_action, efactor
from .metrics import (
    MetricsReport,
    RunTrace,
    StepRecord,
    comparable_trace_bytes,
    effective_tokens,
    read_trace,
    summarize,
    write_trace,
)
from .oracles import (
    NoiseProfile,
    NoisyOracle,
    ScriptedOracle,
    ScriptedTask,
    TableEntry,
    TableOracle,
    exact_match,
    generate_suite,
    load_suite,
    load_table,
    save_suite,
    standard_suite,
    table_for_task,
    validate_task,
)
from .plotting import emit_trajectory_plot
from .signals import SignalReading, implicit_eos_density, mean_eos_confidence, read_signal
from .sweep import (
    SUMMARY_COLUMNS,
    comparable_summary_bytes,
    config_from_settings,
    expand_cells,
    load_sweep_spec,
    run_sweep,
)
from .strategies import (
    RunResult,
    RunStatus,
    TwoStageConfig,
    run,
    run_fixed,
    run_rho_eos,
    run_two_stage,
)

__version__ = "0.1.0"
