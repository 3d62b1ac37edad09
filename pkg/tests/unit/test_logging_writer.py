import json
import logging

import pytest

from app.utils.logging import (
    BufferedJsonlWriter,
    JsonFormatter,
    log_timing,
    log_verdict_failures,
)


def test_buffered_jsonl_writer_flushes(tmp_path) -> None:
    destination = tmp_path / "runs.jsonl"
    writer = BufferedJsonlWriter(destination, buffer_size=2)

    writer.write({"analysis": "chainrec"})
    assert writer.pending() == 1
    assert not destination.exists()

    writer.write({"analysis": "spectral"})
    assert destination.exists()

    contents = destination.read_text().splitlines()
    assert [json.loads(line)["analysis"] for line in contents] == ["chainrec", "spectral"]

    writer.write({"analysis": "verdicts"})
    writer.flush()
    lines = destination.read_text().splitlines()
    assert json.loads(lines[-1])["analysis"] == "verdicts"


def test_log_timing_emits_start_and_error(caplog: pytest.LogCaptureFixture) -> None:
    logger = logging.getLogger("tests.timing")
    with caplog.at_level(logging.INFO, logger="tests.timing"):
        with pytest.raises(ValueError):
            with log_timing(logger, "boxdyn.build", resolution=64):
                raise ValueError("boom")
    messages = [record.getMessage() for record in caplog.records]
    assert any("boxdyn.build.start" in message for message in messages)
    assert any("boxdyn.build.error" in message for message in messages)


def test_verdict_failures_are_silent_when_empty(caplog: pytest.LogCaptureFixture) -> None:
    logger = logging.getLogger("tests.verdicts")
    with caplog.at_level(logging.WARNING, logger="tests.verdicts"):
        log_verdict_failures(logger, analysis="cycles", failures=[])
        assert not caplog.records
        log_verdict_failures(logger, analysis="cycles", failures=[(0, 1)])
    assert "verdict.failed" in caplog.records[0].getMessage()


def test_writer_context_flushes_numpy_fields(tmp_path) -> None:
    np = pytest.importorskip("numpy")
    destination = tmp_path / "runs.jsonl"
    with BufferedJsonlWriter(destination) as writer:
        writer.write({"analysis": "chainrec", "boxes": np.int64(4096), "classes": np.arange(3)})
        assert not destination.exists()
    record = json.loads(destination.read_text().splitlines()[0])
    assert record == {"analysis": "chainrec", "boxes": 4096, "classes": [0, 1, 2]}


def test_json_formatter_unwraps_events() -> None:
    message = json.dumps({"event": "boxdyn.graph", "edges": 9})
    record = logging.LogRecord("app.boxdyn", logging.INFO, __file__, 1, message, None, None)
    data = json.loads(JsonFormatter().format(record))
    assert data["event"] == "boxdyn.graph"
    assert data["edges"] == 9
    assert data["severity"] == "INFO"
    assert "message" not in data
