import json
from pathlib import Path

import pytest

from maskflow import (
    comparable_summary_bytes,
    comparable_trace_bytes,
    load_suite,
    read_trace,
    save_suite,
)
from maskflow.cli import main

from conftest import make_task

SERVER = Path(__file__).with_name("lineserver.py")


@pytest.fixture
def suite_path(tmp_path):
    save_suite([make_task(200), make_task(30)], tmp_path / "suite.json")
    return tmp_path / "suite.json"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenTasks:
    def test_writes_a_loadable_suite(self, tmp_path, capsys):
        out = tmp_path / "tasks.json"
        code, stdout, _ = run_cli(
            capsys, "gen-tasks", "--out", str(out), "--count", "5", "--seed", "3"
        )
        assert code == 0
        assert str(out) in stdout
        assert len(load_suite(out)) == 5

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "gen-tasks", "--out", str(a), "--count", "8", "--seed", "1")
        run_cli(capsys, "gen-tasks", "--out", str(b), "--count", "8", "--seed", "1")
        assert a.read_bytes() == b.read_bytes()

    def test_fixed_distribution(self, tmp_path, capsys):
        out = tmp_path / "tasks.json"
        run_cli(
            capsys, "gen-tasks", "--out", str(out), "--count", "3",
            "--dist", "fixed", "--mean", "25",
        )
        assert all(t.target_len == 25 for t in load_suite(out))


class TestRunOracle:
    def test_happy_path_summary_line(self, suite_path, capsys):
        code, stdout, _ = run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}"
        )
        assert code == 0
        assert "status=complete" in stdout
        assert "e_token=200" in stdout
        assert "n_token=224" in stdout
        assert "steps=6" in stdout
        assert "adjust_events=5" in stdout
        assert "exact_match=1" in stdout

    def test_task_index_selector(self, suite_path, capsys):
        code, stdout, _ = run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}#1"
        )
        assert code == 0
        assert "e_token=30" in stdout

    def test_index_out_of_range(self, suite_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--model", f"oracle:{suite_path}#7"])
        assert exc.value.code == 2
        assert "out of range" in capsys.readouterr().err

    def test_prompt_flag_conflicts_with_oracle(self, suite_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--model", f"oracle:{suite_path}", "--prompt", "1,2"])
        assert exc.value.code == 2
        assert "conflicts" in capsys.readouterr().err

    def test_missing_suite_file_is_a_clean_failure(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            capsys, "run", "--model", f"oracle:{tmp_path}/nope.json"
        )
        assert code == 1
        assert "model endpoint failed" in stderr

    def test_trace_header_echoes_flags(self, suite_path, tmp_path, capsys):
        trace_path = tmp_path / "run.jsonl"
        code, _, _ = run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}",
            "--l-init", "32", "--preset", "sym", "--trace", str(trace_path),
        )
        assert code == 0
        header = read_trace(trace_path).header
        assert header["l_init"] == 32
        assert header["rho_low"] == 0.4
        assert header["rho_high"] == 0.6

    def test_explicit_threshold_beats_preset(self, suite_path, tmp_path, capsys):
        trace_path = tmp_path / "run.jsonl"
        run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}",
            "--preset", "sym", "--rho-high", "0.85", "--trace", str(trace_path),
        )
        header = read_trace(trace_path).header
        assert header["rho_low"] == 0.4
        assert header["rho_high"] == 0.85

    def test_invalid_band_names_the_constraint(self, suite_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main([
                "run", "--model", f"oracle:{suite_path}",
                "--rho-low", "0.9", "--rho-high", "0.5",
            ])
        assert exc.value.code == 2
        assert "rho_low" in capsys.readouterr().err

    def test_unknown_model_scheme(self, suite_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--model", f"file:{suite_path}"])
        assert exc.value.code == 2


class TestConfigFile:
    def test_flags_beat_config_beat_defaults(self, suite_path, tmp_path, capsys):
        config = tmp_path / "settings.json"
        config.write_text(
            json.dumps({"l_init": 32, "tau_high": 0.95}), encoding="utf-8"
        )
        trace_path = tmp_path / "run.jsonl"
        code, _, _ = run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}",
            "--config", str(config), "--l-init", "16", "--trace", str(trace_path),
        )
        assert code == 0
        header = read_trace(trace_path).header
        assert header["l_init"] == 16        # explicit flag wins
        assert header["tau_high"] == 0.95    # config file fills the gap
        assert header["l_max"] == 2048       # untouched default

    def test_unreadable_config_rejected(self, suite_path, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main([
                "run", "--model", f"oracle:{suite_path}",
                "--config", str(tmp_path / "missing.json"),
            ])
        assert exc.value.code == 2


class TestRunBridge:
    def test_bridge_trace_matches_oracle_trace(self, suite_path, tmp_path, capsys):
        # the same decode driven through the wire protocol and through
        # the in-process oracle must be indistinguishable on disk
        from maskflow import Vocabulary, table_for_task

        task = make_task(200)
        vocab = Vocabulary(256, 0, 1)
        table_path = tmp_path / "table.json"
        table_path.write_text(json.dumps(table_for_task(task, vocab)), encoding="utf-8")

        oracle_trace = tmp_path / "oracle.jsonl"
        bridge_trace = tmp_path / "bridge.jsonl"
        code_a, out_a, _ = run_cli(
            capsys, "run", "--model", f"oracle:{suite_path}",
            "--trace", str(oracle_trace),
        )
        command = f"python3 {SERVER} table {table_path}"
        code_b, out_b, _ = run_cli(
            capsys, "run", "--model", f"bridge:{command}",
            "--prompt", "7,8", "--trace", str(bridge_trace),
        )
        assert code_a == 0 and code_b == 0
        assert comparable_trace_bytes(oracle_trace) == comparable_trace_bytes(bridge_trace)
        # only the oracle run can judge exactness
        assert "exact_match=1" in out_a
        assert "exact_match" not in out_b

    def test_dead_server_aborts_with_exit_one(self, capsys):
        command = f"python3 {SERVER} eof"
        code, stdout, stderr = run_cli(
            capsys, "run", "--model", f"bridge:{command}", "--prompt", "7",
            "--l-init", "8",
        )
        assert code == 1
        assert "status=aborted" in stdout
        assert "run aborted" in stderr

    def test_missing_command_is_a_clean_failure(self, capsys):
        code, _, stderr = run_cli(
            capsys, "run", "--model", "bridge:definitely-not-a-binary-xyz",
        )
        assert code == 1
        assert "model endpoint failed" in stderr


class TestSweepCommand:
    @pytest.fixture
    def sweep_spec(self, tmp_path):
        save_suite([make_task(30), make_task(60)], tmp_path / "tasks.json")
        spec = {
            "suite": "tasks.json",
            "axes": {"strategy": ["fixed", "rho-eos"]},
            "base": {"l_init": 16},
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec), encoding="utf-8")
        return path

    def test_sweep_writes_summary_and_traces(self, sweep_spec, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, "sweep", str(sweep_spec), "--out-dir", str(out_dir), "--trace"
        )
        assert code == 0
        assert str(out_dir / "summary.csv") in stdout
        assert (out_dir / "summary.csv").exists()
        assert len(list((out_dir / "traces").iterdir())) == 4

    def test_seeded_sweeps_are_reproducible(self, sweep_spec, tmp_path, capsys):
        run_cli(capsys, "sweep", str(sweep_spec), "--out-dir", str(tmp_path / "a"))
        run_cli(capsys, "sweep", str(sweep_spec), "--out-dir", str(tmp_path / "b"))
        assert comparable_summary_bytes(tmp_path / "a" / "summary.csv") == \
            comparable_summary_bytes(tmp_path / "b" / "summary.csv")

    def test_bad_spec_exits_two(self, tmp_path, capsys):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"axes": {}}), encoding="utf-8")
        with pytest.raises(SystemExit) as exc:
            main(["sweep", str(path)])
        assert exc.value.code == 2


class TestPlotCommand:
    def test_renders_figure_and_csv(self, suite_path, tmp_path, capsys):
        traces = []
        for i, l_init in enumerate((16, 64)):
            trace = tmp_path / f"t{i}.jsonl"
            run_cli(
                capsys, "run", "--model", f"oracle:{suite_path}#1",
                "--l-init", str(l_init), "--trace", str(trace),
            )
            traces.append(str(trace))
        code, stdout, _ = run_cli(
            capsys, "plot", *traces, "--out", str(tmp_path / "fig.svg")
        )
        assert code == 0
        assert (tmp_path / "fig.svg").exists()
        assert (tmp_path / "fig.csv").exists()
        assert "fig.svg" in stdout
        assert "fig.csv" in stdout

    def test_unreadable_trace_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        with pytest.raises(SystemExit) as exc:
            main(["plot", str(bad)])
        assert exc.value.code == 2


class TestHelpDefaults:
    def test_run_help_pins_the_documented_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for fragment in (
            "default: 64",      # l_init
            "default: 2048",    # l_max
            "default: 0.9",     # tau_high
            "default: 128",     # adjustment budget
            "default: asym",    # preset band
            "default: const",   # expansion family
            "default: 32",      # base increment
            "default: rho-eos", # strategy
            "default: density", # signal
        ):
            assert fragment in text
