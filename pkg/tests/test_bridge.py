import json
import socket
import threading
from pathlib import Path

import pytest

import lineserver
from maskflow import (
    BridgeConfig,
    BridgeProvider,
    ConfigError,
    DecodeConfig,
    MASKED,
    ProviderError,
    RunStatus,
    ScriptedOracle,
    load_table,
    new_sequence,
    predict,
    run_rho_eos,
    table_for_task,
)

from conftest import make_task, state_from_tokens

SERVER = Path(__file__).with_name("lineserver.py")


def write_table(tmp_path, task, vocab):
    path = tmp_path / "table.json"
    path.write_text(json.dumps(table_for_task(task, vocab)), encoding="utf-8")
    return path


def stdio_provider(vocab, mode, *args, timeout=5.0, retries=2):
    command = " ".join(["python3", str(SERVER), mode, *map(str, args)])
    cfg = BridgeConfig(command=command, request_timeout=timeout, max_retries=retries)
    return BridgeProvider(cfg, vocab)


class TestConfig:
    def test_exactly_one_endpoint(self):
        with pytest.raises(ConfigError):
            BridgeConfig()
        with pytest.raises(ConfigError):
            BridgeConfig(command="x", address="y:1")

    def test_timeout_and_retries_validated(self):
        with pytest.raises(ConfigError):
            BridgeConfig(command="x", request_timeout=0)
        with pytest.raises(ConfigError):
            BridgeConfig(command="x", max_retries=-1)

    def test_address_needs_a_port(self, vocab):
        cfg = BridgeConfig(address="localhost")
        with pytest.raises(ConfigError):
            BridgeProvider(cfg, vocab)


class TestStdioTransport:
    def test_matches_the_in_process_table(self, vocab, tmp_path):
        task = make_task(6)
        table_path = write_table(tmp_path, task, vocab)
        reference = load_table(table_path)
        state = state_from_tokens([10, 11, MASKED, MASKED, MASKED], prompt=task.prompt)
        with stdio_provider(vocab, "table", table_path) as bridge:
            assert predict(bridge, state, vocab) == predict(reference, state, vocab)

    def test_full_run_over_the_wire(self, vocab, tmp_path):
        task = make_task(40)
        table_path = write_table(tmp_path, task, vocab)
        cfg = DecodeConfig(l_init=16)
        with stdio_provider(vocab, "table", table_path) as bridge:
            remote = run_rho_eos(cfg, bridge, task.prompt, vocab)
        local = run_rho_eos(cfg, ScriptedOracle(task, vocab), task.prompt, vocab)
        assert remote.status is RunStatus.COMPLETE
        assert remote.final_state.gen == local.final_state.gen
        assert remote.trace.records == local.trace.records

    def test_request_payload_and_increasing_ids(self, vocab, tmp_path):
        task = make_task(30)
        table_path = write_table(tmp_path, task, vocab)
        record_path = tmp_path / "requests.jsonl"
        cfg = DecodeConfig(l_init=16)
        with stdio_provider(vocab, "table", table_path, record_path) as bridge:
            run_rho_eos(cfg, bridge, task.prompt, vocab)
        requests = [
            json.loads(line)
            for line in record_path.read_text(encoding="utf-8").splitlines()
        ]
        assert len(requests) >= 2
        ids = [r["id"] for r in requests]
        assert ids == sorted(ids)
        assert len(set(ids)) == len(ids)
        first = requests[0]
        assert first["prompt_len"] == len(task.prompt)
        assert first["tokens"][: len(task.prompt)] == list(task.prompt)
        # a fresh buffer goes over the wire as all-mask
        assert first["tokens"][len(task.prompt):] == [vocab.mask_id] * 16
        assert first["mask_id"] == vocab.mask_id
        assert first["eos_id"] == vocab.eos_id
        # later requests carry the committed tokens back to the server
        later = requests[1]["tokens"][len(task.prompt):]
        assert set(later) != {vocab.mask_id}

    def test_close_is_idempotent(self, vocab, tmp_path):
        task = make_task(4)
        table_path = write_table(tmp_path, task, vocab)
        bridge = stdio_provider(vocab, "table", table_path)
        state = new_sequence(task.prompt, 4, vocab)
        predict(bridge, state, vocab)
        bridge.close()
        bridge.close()


class TestServerMisbehaviour:
    def run_one(self, vocab, mode, *args, **kw):
        state = state_from_tokens([MASKED] * 4, prompt=(7, 8))
        with stdio_provider(vocab, mode, *args, **kw) as bridge:
            return predict(bridge, state, vocab)

    def test_error_response(self, vocab):
        with pytest.raises(ProviderError, match="scripted failure"):
            self.run_one(vocab, "error")

    def test_mismatched_id(self, vocab):
        with pytest.raises(ProviderError, match="expected 0"):
            self.run_one(vocab, "wrongid")

    def test_probability_out_of_range(self, vocab):
        with pytest.raises(ProviderError, match="out of range"):
            self.run_one(vocab, "badprob")

    def test_position_not_masked(self, vocab):
        with pytest.raises(ProviderError, match="does not match a masked slot"):
            self.run_one(vocab, "badpos")

    def test_missing_prediction(self, vocab):
        with pytest.raises(ProviderError, match="3 predictions for 4"):
            self.run_one(vocab, "short")

    def test_unparseable_line(self, vocab):
        with pytest.raises(ProviderError, match="unparseable"):
            self.run_one(vocab, "garbage")

    def test_server_exit_reads_as_closed_connection(self, vocab):
        with pytest.raises(ProviderError, match="closed the connection"):
            self.run_one(vocab, "eof")

    def test_silent_server_exhausts_retries(self, vocab):
        with pytest.raises(ProviderError, match="2 attempts"):
            self.run_one(vocab, "silent", timeout=0.2, retries=1)

    def test_timeout_retries_under_a_fresh_id(self, vocab, tmp_path):
        # the server stalls past the first deadline, then answers the old
        # id late; the client must skip that answer and accept the retry
        task = make_task(6)
        table_path = write_table(tmp_path, task, vocab)
        state = state_from_tokens([MASKED] * 4, prompt=task.prompt)
        with stdio_provider(
            vocab, "late", "0.6", table_path, timeout=0.25, retries=2
        ) as bridge:
            preds = predict(bridge, state, vocab)
        reference = load_table(table_path)
        assert preds == predict(reference, state, vocab)


def serve_tcp_once(vocab, table, ready):
    """Accept one connection and answer table predictions until EOF."""
    srv = socket.create_server(("127.0.0.1", 0))
    ready["port"] = srv.getsockname()[1]
    ready["event"].set()
    conn, _ = srv.accept()
    with conn, conn.makefile("rwb") as fh:
        for line in fh:
            req = json.loads(line)
            reply = {"id": req["id"], "predictions": lineserver.predictions_for(req, table)}
            fh.write((json.dumps(reply) + "\n").encode("utf-8"))
            fh.flush()
    srv.close()


class TestTcpTransport:
    def test_matches_the_stdio_answers(self, vocab, tmp_path):
        task = make_task(12)
        table = table_for_task(task, vocab)
        ready = {"event": threading.Event()}
        thread = threading.Thread(
            target=serve_tcp_once, args=(vocab, table, ready), daemon=True
        )
        thread.start()
        assert ready["event"].wait(timeout=5)
        cfg = BridgeConfig(address=f"127.0.0.1:{ready['port']}", request_timeout=5.0)
        state = state_from_tokens([10, MASKED, MASKED], prompt=task.prompt)
        with BridgeProvider(cfg, vocab) as bridge:
            preds = predict(bridge, state, vocab)
        table_path = write_table(tmp_path, task, vocab)
        assert preds == predict(load_table(table_path), state, vocab)
        thread.join(timeout=5)

    def test_full_run_over_tcp(self, vocab):
        task = make_task(20)
        table = table_for_task(task, vocab)
        ready = {"event": threading.Event()}
        thread = threading.Thread(
            target=serve_tcp_once, args=(vocab, table, ready), daemon=True
        )
        thread.start()
        assert ready["event"].wait(timeout=5)
        cfg_net = BridgeConfig(address=f"127.0.0.1:{ready['port']}", request_timeout=5.0)
        decode = DecodeConfig(l_init=8)
        with BridgeProvider(cfg_net, vocab) as bridge:
            remote = run_rho_eos(decode, bridge, task.prompt, vocab)
        local = run_rho_eos(decode, ScriptedOracle(task, vocab), task.prompt, vocab)
        assert remote.status is RunStatus.COMPLETE
        assert remote.final_state.gen == local.final_state.gen
        thread.join(timeout=5)
