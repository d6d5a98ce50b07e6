"""Run configuration: decode threshold, length bounds, growth schedule.

Defaults here are the single source of truth; the CLI builds its flag
defaults from these values so that help text and library behaviour never
drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import ConfigError


class Signal(str, Enum):
    """Which per-step reading drives the length controller."""

    DENSITY = "density"
    CONFIDENCE = "confidence"


class Strategy(str, Enum):
    FIXED = "fixed"
    RHO_EOS = "rho-eos"
    TWO_STAGE = "two-stage"


class EFactorFamily(str, Enum):
    CONSTANT = "const"
    LINEAR = "linear"
    EXPONENTIAL = "exp"


DEFAULT_L_INIT = 64
DEFAULT_L_MAX = 2048
DEFAULT_TAU_HIGH = 0.9
DEFAULT_MAX_ADJUST = 128
DEFAULT_BASE_INCREMENT = 32
DEFAULT_LINEAR_GAIN = 3.0
DEFAULT_EXP_GAIN = 8.0

# Named threshold bands for the equilibrium region.  "sym" sits tight
# around the middle; "asym" tolerates a larger implicit-EOS share before
# contracting, which favours finishing thoughts over trimming early.
PRESETS: dict[str, tuple[float, float]] = {
    "sym": (0.4, 0.6),
    "asym": (0.4, 0.8),
}
DEFAULT_PRESET = "asym"


@dataclass(frozen=True)
class EFactorSpec:
    """How many slots one adjustment event adds or removes.

    The magnitude grows with the distance between the signal and the
    nearer edge of the equilibrium band; the family picks the shape of
    that growth.
    """

    family: EFactorFamily = EFactorFamily.CONSTANT
    base_increment: int = DEFAULT_BASE_INCREMENT
    linear_gain: float = DEFAULT_LINEAR_GAIN
    exp_gain: float = DEFAULT_EXP_GAIN

    def __post_init__(self):
        if self.base_increment < 1:
            raise ConfigError(f"base_increment must be >= 1, got {self.base_increment}")
        if self.linear_gain < 0:
            raise ConfigError(f"linear_gain must be >= 0, got {self.linear_gain}")
        if self.exp_gain < 1:
            raise ConfigError(f"exp_gain must be >= 1, got {self.exp_gain}")


@dataclass(frozen=True)
class DecodeConfig:
    l_init: int = DEFAULT_L_INIT
    l_max: int = DEFAULT_L_MAX
    rho_low: float = PRESETS[DEFAULT_PRESET][0]
    rho_high: float = PRESETS[DEFAULT_PRESET][1]
    tau_high: float = DEFAULT_TAU_HIGH
    n_max_adjust: int = DEFAULT_MAX_ADJUST
    efactor: EFactorSpec = field(default_factory=EFactorSpec)
    signal: Signal = Signal.DENSITY
    strategy: Strategy = Strategy.RHO_EOS
    # When set, the adjustment budget n_max_adjust is spent only by actual
    # expand/contract events instead of by every denoising iteration.
    count_only_adjustments: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.l_init < 1:
            raise ConfigError(f"l_init must be >= 1, got {self.l_init}")
        if self.l_init > self.l_max:
            raise ConfigError(f"l_init={self.l_init} exceeds l_max={self.l_max}")
        if not 0.0 <= self.rho_low < self.rho_high <= 1.0:
            raise ConfigError(
                "thresholds must satisfy 0 <= rho_low < rho_high <= 1, "
                f"got rho_low={self.rho_low}, rho_high={self.rho_high}"
            )
        if not 0.0 < self.tau_high <= 1.0:
            raise ConfigError(f"tau_high must be in (0, 1], got {self.tau_high}")
        if self.n_max_adjust < 0:
            raise ConfigError(f"n_max_adjust must be >= 0, got {self.n_max_adjust}")
