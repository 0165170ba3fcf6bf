"""Event log: ordering, persistence, crash tolerance, degraded mode."""

import json
import logging

import pytest

from ransim.telemetry import (
    EventLog,
    EventLogParseError,
    SimEvent,
    events_since,
    read_events,
)


class TestEmit:
    def test_three_events_three_lines_seq_1_2_3(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.record("run_started")
            log.record("file_encrypted", relative_path="a.txt.locked", bytes=10)
            log.record("run_finished")
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert [json.loads(l)["seq"] for l in lines] == [1, 2, 3]

    def test_seq_resumes_across_logs(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.record("run_started")
            log.record("run_finished")
        with EventLog(path) as log:
            event = log.record("decrypt_started")
        assert event.seq == 3

    def test_unknown_kind_rejected(self, tmp_path):
        with EventLog(tmp_path / "e.jsonl") as log:
            with pytest.raises(ValueError):
                log.record("file_exfiltrated")

    def test_file_encrypted_requires_path_and_bytes(self):
        with pytest.raises(ValueError):
            SimEvent(seq=1, timestamp=0.0, kind="file_encrypted")

    def test_non_monotone_seq_rejected(self, tmp_path):
        with EventLog(tmp_path / "e.jsonl") as log:
            log.record("run_started")
            with pytest.raises(ValueError):
                log.emit(SimEvent(seq=1, timestamp=0.0, kind="run_finished"))

    def test_timestamps_never_decrease_even_if_clock_does(self, tmp_path):
        times = iter([100.0, 50.0, 60.0])
        with EventLog(tmp_path / "e.jsonl", clock=lambda: next(times)) as log:
            stamps = [
                log.record("run_started").timestamp,
                log.record("manifest_flushed").timestamp,
                log.record("run_finished").timestamp,
            ]
        assert stamps == sorted(stamps)

    def test_write_failure_degrades_to_buffer_with_warning(
        self, tmp_path, caplog
    ):
        path = tmp_path / "e.jsonl"
        log = EventLog(path)
        log.record("run_started")
        log._fh.close()  # simulate the sink dying out from under us
        with caplog.at_level(logging.WARNING, logger="ransim.telemetry"):
            log.record("run_finished")
        assert "degraded" in caplog.text
        assert [e.kind for e in log.degraded_buffer] == ["run_finished"]
        # first event stayed durable
        assert [e.kind for e in read_events(path)] == ["run_started"]


class TestRead:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            emitted = [
                log.record("run_started", detail="x"),
                log.record("file_skipped", relative_path="a.zip"),
                log.record("run_finished"),
            ]
        assert read_events(path) == emitted

    def test_torn_final_line_dropped(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.record("run_started")
            log.record("run_finished")
        with open(path, "a") as fh:
            fh.write('{"seq": 3, "timestamp": 1.0, "kin')  # torn mid-write
        events = read_events(path)
        assert [e.seq for e in events] == [1, 2]

    def test_malformed_middle_line_names_line_number(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.record("run_started")
            log.record("run_finished")
        lines = path.read_text().splitlines()
        lines.insert(1, "garbage")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(EventLogParseError) as exc_info:
            read_events(path)
        assert exc_info.value.line == 2

    def test_events_since(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.record("run_started")
            log.record("manifest_flushed")
            log.record("run_finished")
        assert [e.seq for e in events_since(path, 0)] == [1, 2, 3]
        assert [e.seq for e in events_since(path, 2)] == [3]
        assert events_since(path, 3) == []
        assert events_since(tmp_path / "missing.jsonl", 0) == []
