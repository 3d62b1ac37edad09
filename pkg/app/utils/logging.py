from __future__ import annotations

import json
import logging
import sys
import time
from collections.abc import Iterator, Mapping, Sequence
from contextlib import contextmanager
from pathlib import Path
from types import TracebackType

from app.utils.config import load_runtime_config

LOG_FILENAME = "hyperbolic-lab.log"
MAX_REPORTED_FAILURES = 20


def _plain(value: object) -> object:
    """JSON fallback: numpy scalars and arrays become Python numbers and lists."""
    for attribute in ("item", "tolist"):
        convert = getattr(value, attribute, None)
        if callable(convert):
            try:
                return convert()
            except (TypeError, ValueError):
                continue
    return str(value)


def _dumps(payload: Mapping[str, object]) -> str:
    return json.dumps(payload, default=_plain)


def configure_logging(log_level: str | None = None, log_path: Path | None = None) -> None:
    """Console output on stderr plus JSON lines under the configured log directory."""
    config = load_runtime_config()
    level = getattr(logging, (log_level or config.log_level).upper(), logging.INFO)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(ConsoleFormatter())
    handlers: list[logging.Handler] = [console]

    destination = log_path or config.log_dir / LOG_FILENAME
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        structured: logging.Handler = logging.FileHandler(destination, encoding="utf-8")
    except OSError:
        pass
    else:
        structured.setFormatter(JsonFormatter())
        handlers.append(structured)

    logging.basicConfig(level=level, handlers=handlers)


def get_logger(name: str) -> logging.Logger:
    if not logging.getLogger().handlers:
        configure_logging()
    return logging.getLogger(name)


def _event_message(event: str, fields: Mapping[str, object] | None = None) -> str:
    return _dumps({"event": event, **(fields or {})})


def _split_event(message: str) -> tuple[str, dict[str, object]] | None:
    """(event, fields) for messages produced by `log_event`; None for plain text."""
    if not message.startswith("{"):
        return None
    try:
        payload = json.loads(message)
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict) or "event" not in payload:
        return None
    event = str(payload.pop("event"))
    return event, payload


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        data: dict[str, object] = {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(record.created)),
            "logger": record.name,
            "severity": record.levelname,
        }
        message = record.getMessage()
        structured = _split_event(message)
        if structured is None:
            data["message"] = message
        else:
            data["event"], fields = structured
            data.update(fields)
        if record.exc_info:
            data["exc_info"] = self.formatException(record.exc_info)
        return _dumps(data)


class ConsoleFormatter(logging.Formatter):
    """Renders structured events as `event key=value ...` on one line."""

    def format(self, record: logging.LogRecord) -> str:
        clock = time.strftime("%H:%M:%S", time.localtime(record.created))
        message = record.getMessage()
        structured = _split_event(message)
        if structured is not None:
            event, fields = structured
            message = " ".join([event, *(f"{key}={fields[key]}" for key in sorted(fields))])
        line = f"{clock} {record.levelname[0]} {record.name}: {message}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def log_event(logger: logging.Logger, event: str, **fields: object) -> None:
    logger.info(_event_message(event, fields))


def log_verdict_failures(
    logger: logging.Logger, *, analysis: str, failures: Sequence[object]
) -> None:
    """Warn with the first failing instances of a verdict; silent when none failed."""
    if not failures:
        return
    shown = [str(item) for item in failures[:MAX_REPORTED_FAILURES]]
    logger.warning(
        _event_message(
            "verdict.failed", {"analysis": analysis, "count": len(failures), "failures": shown}
        )
    )


def _elapsed_ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


@contextmanager
def log_timing(logger: logging.Logger, event: str, **fields: object) -> Iterator[None]:
    """Emit `<event>.start`, then `.complete` or `.error` carrying `elapsed_ms`."""
    start = time.perf_counter()
    logger.info(_event_message(f"{event}.start", fields))
    try:
        yield
    except Exception:
        logger.exception(
            _event_message(f"{event}.error", {**fields, "elapsed_ms": _elapsed_ms(start)})
        )
        raise
    logger.info(_event_message(f"{event}.complete", {**fields, "elapsed_ms": _elapsed_ms(start)}))


class BufferedJsonlWriter:
    """Appends telemetry records to a JSON-lines file in batches.

    Usable as a context manager; leaving the block flushes whatever is still buffered.
    """

    def __init__(self, path: Path, *, buffer_size: int = 50) -> None:
        self.path = Path(path)
        self.buffer_size = max(1, buffer_size)
        self._lines: list[str] = []

    def __enter__(self) -> BufferedJsonlWriter:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        self.flush()

    def write(self, record: Mapping[str, object] | str) -> None:
        line = record if isinstance(record, str) else _dumps(record)
        self._lines.append(line.rstrip("\n"))
        if len(self._lines) >= self.buffer_size:
            self.flush()

    def flush(self) -> None:
        if not self._lines:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write("\n".join(self._lines) + "\n")
        except OSError:
            # telemetry is best effort; keep the lines for the next flush
            return
        self._lines.clear()

    def pending(self) -> int:
        return len(self._lines)
