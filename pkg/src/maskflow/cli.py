"""Command-line front end.

Four subcommands: `run` executes one decoding run against an oracle or
an external model server, `sweep` runs a config grid over a task suite,
`plot` renders signal trajectories from saved traces, and `gen-tasks`
writes synthetic task suites.  Settings resolve as explicit flags over
config-file entries over built-in defaults, and the effective
configuration is echoed into every trace header.

Set MASKFLOW_LOG=debug (or info, warning) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .bridge import BridgeConfig, BridgeProvider
from .config import (
    DEFAULT_PRESET,
    DecodeConfig,
    EFactorFamily,
    EFactorSpec,
    PRESETS,
    Signal,
    Strategy,
)
from .core import ConfigError
from .kernel import ProviderError
from .metrics import read_trace, write_trace
from .oracles import exact_match, generate_suite, load_suite, save_suite
from .plotting import emit_trajectory_plot
from .strategies import RunStatus, run
from .sweep import (
    DEFAULT_EOS_ID,
    DEFAULT_MASK_ID,
    DEFAULT_VOCAB_SIZE,
    config_from_settings,
    load_sweep_spec,
    provider_for_task,
    run_sweep,
    two_stage_from_settings,
    vocab_from_settings,
)

log = logging.getLogger("maskflow.cli")

_DEFAULTS = DecodeConfig()
_EF_DEFAULTS = EFactorSpec()

# Flag table shared by `run` and the config-file merge: (flag, settings key,
# argparse kwargs).  Defaults come from the config module so help text and
# library behaviour cannot disagree.
_RUN_FLAGS = [
    ("--strategy", "strategy", dict(choices=[s.value for s in Strategy], default=_DEFAULTS.strategy.value, help="decoding strategy")),
    ("--signal", "signal", dict(choices=[s.value for s in Signal], default=_DEFAULTS.signal.value, help="length-control signal")),
    ("--l-init", "l_init", dict(type=int, default=_DEFAULTS.l_init, help="initial generation length")),
    ("--l-max", "l_max", dict(type=int, default=_DEFAULTS.l_max, help="hard cap on generation length")),
    ("--preset", "preset", dict(choices=sorted(PRESETS), default=DEFAULT_PRESET, help="named threshold band")),
    ("--rho-low", "rho_low", dict(type=float, default=None, help="lower threshold; overrides the preset")),
    ("--rho-high", "rho_high", dict(type=float, default=None, help="upper threshold; overrides the preset")),
    ("--tau-high", "tau_high", dict(type=float, default=_DEFAULTS.tau_high, help="commit confidence threshold")),
    ("--max-adjust-steps", "n_max_adjust", dict(type=int, default=_DEFAULTS.n_max_adjust, help="adjustment budget N")),
    ("--efactor", "efactor", dict(choices=[f.value for f in EFactorFamily], default=_EF_DEFAULTS.family.value, help="adjustment magnitude family")),
    ("--base-increment", "base_increment", dict(type=int, default=_EF_DEFAULTS.base_increment, help="base adjustment size B")),
    ("--linear-gain", "linear_gain", dict(type=float, default=_EF_DEFAULTS.linear_gain, help="slope of the linear family")),
    ("--exp-gain", "exp_gain", dict(type=float, default=_EF_DEFAULTS.exp_gain, help="base of the exponential family")),
    ("--count-only-adjustments", "count_only_adjustments", dict(action="store_true", default=False, help="spend the budget only on expand/contract events")),
    ("--seed", "seed", dict(type=int, default=_DEFAULTS.seed, help="run seed (noise streams derive from it)")),
    ("--noise-temperature", "noise_temperature", dict(type=float, default=0.0, help="oracle confidence noise scale")),
    ("--noise-eos-bias", "noise_eos_bias", dict(type=float, default=0.0, help="early EOS probability inflation")),
    ("--noise-eos-cutoff", "noise_eos_cutoff", dict(type=float, default=0.0, help="decoded fraction below which the EOS bias applies")),
    ("--block-size", "block_size", dict(type=int, default=64, help="two-stage expansion block")),
    ("--stage1-max-rounds", "stage1_max_rounds", dict(type=int, default=32, help="two-stage stage-one round cap")),
    ("--trailing-eos-threshold", "trailing_eos_threshold", dict(type=float, default=0.9, help="two-stage stage-one exit confidence")),
    ("--vocab-size", "vocab_size", dict(type=int, default=DEFAULT_VOCAB_SIZE, help="token id space")),
    ("--mask-id", "mask_id", dict(type=int, default=DEFAULT_MASK_ID, help="mask token id")),
    ("--eos-id", "eos_id", dict(type=int, default=DEFAULT_EOS_ID, help="EOS token id")),
]


def _add_run_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    for flag, _key, kwargs in _RUN_FLAGS:
        kw = dict(kwargs)
        if suppress:
            kw["default"] = argparse.SUPPRESS
        parser.add_argument(flag, **kw)
    common = dict(default=argparse.SUPPRESS) if suppress else {}
    parser.add_argument("--config", help="JSON file with settings; flags override it", **common)


def build_parser(suppress_defaults: bool = False) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskflow",
        description="Variable-length decoding for masked diffusion models, at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run",
        help="execute one decoding run",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_run_flags(p_run, suppress_defaults)
    p_run.add_argument("--model", required=True, help="oracle:PATH[#INDEX], bridge:CMD, or tcp:HOST:PORT")
    p_run.add_argument("--prompt", default=None, help="comma-separated prompt token ids (bridge/tcp models)")
    p_run.add_argument("--trace", default=None, help="write the run trace to this JSONL file")

    p_sweep = sub.add_parser(
        "sweep",
        help="run a config grid over a task suite",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_sweep.add_argument("spec", help="sweep spec JSON file")
    p_sweep.add_argument("--out-dir", default="maskflow-sweep", help="output directory")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p_sweep.add_argument("--trace", action="store_true", help="also write one trace file per run")

    p_plot = sub.add_parser(
        "plot",
        help="render signal trajectories from trace files",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_plot.add_argument("traces", nargs="+", help="trace JSONL files")
    p_plot.add_argument("--out", default="trajectory.svg", help="output SVG path")

    p_gen = sub.add_parser(
        "gen-tasks",
        help="write a synthetic task suite",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_gen.add_argument("--out", required=True, help="output JSON path")
    p_gen.add_argument("--count", type=int, default=50, help="number of tasks")
    p_gen.add_argument("--seed", type=int, default=0, help="generator seed")
    p_gen.add_argument("--dist", choices=["normal", "uniform", "fixed"], default="normal", help="target-length distribution")
    p_gen.add_argument("--mean", type=float, default=200.0, help="mean target length (normal, fixed)")
    p_gen.add_argument("--std", type=float, default=80.0, help="target length spread (normal)")
    p_gen.add_argument("--min-len", type=int, default=8, help="shortest target")
    p_gen.add_argument("--max-len", type=int, default=480, help="longest target")
    p_gen.add_argument("--prompt-len", type=int, default=4, help="prompt length")
    p_gen.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    p_gen.add_argument("--mask-id", type=int, default=DEFAULT_MASK_ID)
    p_gen.add_argument("--eos-id", type=int, default=DEFAULT_EOS_ID)

    return parser


def _explicit_settings(argv: list[str]) -> dict:
    """Re-parse argv with suppressed defaults to learn which flags appeared."""
    shadow = build_parser(suppress_defaults=True)
    ns, _ = shadow.parse_known_args(argv)
    present = vars(ns)
    out = {}
    for _flag, key, _kwargs in _RUN_FLAGS:
        if key in present:
            out[key] = present[key]
    return out


def _merged_settings(argv: list[str], parser: argparse.ArgumentParser) -> dict:
    explicit = _explicit_settings(argv)
    shadow = build_parser(suppress_defaults=True)
    ns, _ = shadow.parse_known_args(argv)
    settings: dict = {}
    config_path = getattr(ns, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            parser.error(f"could not read config file {config_path}: {err}")
        if not isinstance(loaded, dict):
            parser.error(f"config file {config_path} must hold a JSON object")
        settings.update(loaded)
    settings.update(explicit)
    return settings


def _parse_model(spec: str):
    if spec.startswith("oracle:"):
        rest = spec[len("oracle:") :]
        path, _, idx = rest.partition("#")
        return "oracle", path, int(idx) if idx else 0
    if spec.startswith("bridge:"):
        return "bridge", spec[len("bridge:") :], None
    if spec.startswith("tcp:"):
        return "tcp", spec[len("tcp:") :], None
    raise ConfigError(f"model must start with oracle:, bridge:, or tcp:, got {spec!r}")


def _parse_prompt(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as err:
        raise ConfigError(f"prompt must be comma-separated integers: {err}") from None


def cmd_run(args, argv, parser) -> int:
    settings = _merged_settings(argv, parser)
    try:
        cfg = config_from_settings(settings)
        ts = two_stage_from_settings(settings)
        vocab = vocab_from_settings(settings)
        kind, target, index = _parse_model(args.model)
    except ConfigError as err:
        parser.error(str(err))

    provider = None
    close = lambda: None
    task = None
    try:
        if kind == "oracle":
            tasks = load_suite(target)
            if not 0 <= index < len(tasks):
                parser.error(f"task index {index} out of range; suite has {len(tasks)} tasks")
            task = tasks[index]
            if args.prompt is not None:
                parser.error("--prompt conflicts with oracle models; the task supplies the prompt")
            prompt = task.prompt
            provider = provider_for_task(task, vocab, settings, 0)
        else:
            prompt = _parse_prompt(args.prompt)
            bridge_cfg = (
                BridgeConfig(command=target) if kind == "bridge" else BridgeConfig(address=target)
            )
            provider = BridgeProvider(bridge_cfg, vocab)
            close = provider.close
        result = run(cfg, provider, prompt, vocab, ts)
    except ConfigError as err:
        parser.error(str(err))
    except (ProviderError, OSError) as err:
        print(f"model endpoint failed: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        parser.error(str(err))
    finally:
        close()

    if args.trace:
        write_trace(result.trace, args.trace)
        log.info("trace written to %s", args.trace)

    m = result.metrics
    fields = [
        f"status={result.status.value}",
        f"strategy={cfg.strategy.value}",
        f"signal={cfg.signal.value}",
        f"e_token={m.e_token}",
        f"n_token={m.n_token}",
        f"e_ratio={m.e_ratio:.4f}",
        f"steps={m.steps_total}",
        f"adjust_events={m.adjust_events}",
    ]
    if task is not None and result.status is RunStatus.COMPLETE:
        fields.append(f"exact_match={int(exact_match(result.final_state, task, vocab))}")
    fields.append(f"wall_ms={m.wall_time * 1000.0:.1f}")
    print(" ".join(fields))
    if result.status is not RunStatus.COMPLETE:
        print(f"run aborted: {result.abort_reason}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args, parser) -> int:
    try:
        spec = load_sweep_spec(args.spec)
        csv_path = run_sweep(spec, args.out_dir, workers=args.workers, write_traces=args.trace)
    except (ConfigError, ValueError, OSError) as err:
        parser.error(str(err))
    print(csv_path)
    return 0


def cmd_plot(args, parser) -> int:
    try:
        traces = [read_trace(p) for p in args.traces]
        svg_path, csv_path = emit_trajectory_plot(traces, args.out)
    except (ValueError, OSError) as err:
        parser.error(str(err))
    print(svg_path)
    print(csv_path)
    return 0


def cmd_gen_tasks(args, parser) -> int:
    try:
        vocab = vocab_from_settings(
            {"vocab_size": args.vocab_size, "mask_id": args.mask_id, "eos_id": args.eos_id}
        )
        tasks = generate_suite(
            vocab,
            count=args.count,
            seed=args.seed,
            dist=args.dist,
            mean=args.mean,
            std=args.std,
            min_len=args.min_len,
            max_len=args.max_len,
            prompt_len=args.prompt_len,
        )
        save_suite(tasks, args.out)
    except (ConfigError, ValueError, OSError) as err:
        parser.error(str(err))
    print(args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("MASKFLOW_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args, argv, parser)
    if args.command == "sweep":
        return cmd_sweep(args, parser)
    if args.command == "plot":
        return cmd_plot(args, parser)
    if args.command == "gen-tasks":
        return cmd_gen_tasks(args, parser)
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
