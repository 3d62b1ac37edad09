"""Flat metric tables derived from a finished report, for external plotting."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping
from pathlib import Path

from app.services.errors import LabError
from app.services.exports import write_table
from app.utils.logging import get_logger, log_event

LOGGER = get_logger(__name__)

Rows = list[dict[str, object]]


class MissingReportError(LabError):
    """Raised when the report to plot from does not exist or is not a report."""


def _records(value: object) -> list[Mapping[str, object]]:
    return [item for item in value if isinstance(item, Mapping)] if isinstance(value, list) else []


def _coverage_rows(result: Mapping[str, object]) -> Rows:
    return [
        {"resolution": row["resolution"], "coverage": row["coverage"]}
        for row in _records(result.get("sweep"))
    ]


def _escapee_rows(result: Mapping[str, object]) -> Rows:
    enclosure = result.get("enclosure")
    if not isinstance(enclosure, Mapping):
        return []
    return [
        {"n": escapee["n"], "distance": escapee["distance"], "bound": escapee["bound"]}
        for escapee in _records(enclosure.get("escapees"))
    ]


def _residual_rows(result: Mapping[str, object]) -> Rows:
    return [
        {"tol": row["tol"], "residual": row["residual"]}
        for row in _records(result.get("residuals"))
    ]


# analysis -> (file, columns, row builder)
TABLES: dict[str, tuple[str, tuple[str, ...], Callable[[Mapping[str, object]], Rows]]] = {
    "spectral": ("basin_coverage.csv", ("resolution", "coverage"), _coverage_rows),
    "lemma53": ("escapee_distance.csv", ("n", "distance", "bound"), _escapee_rows),
    "koenigs": ("koenigs_residual.csv", ("tol", "residual"), _residual_rows),
}


def load_report(path: Path) -> dict[str, object]:
    if not path.is_file():
        raise MissingReportError(f"No report at {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MissingReportError(f"{path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict) or "analyses" not in payload:
        raise MissingReportError(f"{path} is not a scenario report")
    return payload


def emit_plotdata(report_path: Path) -> list[Path]:
    """Write one CSV per plottable analysis beside the report and return the written paths.

    Analyses that did not produce a result (errors, precondition failures) contribute no file.
    """
    report = load_report(report_path)
    written: list[Path] = []
    for entry in _records(report["analyses"]):
        table = TABLES.get(str(entry.get("name")))
        result = entry.get("result")
        if table is None or not isinstance(result, Mapping) or not result:
            continue
        filename, columns, build_rows = table
        rows = build_rows(result)
        written.append(write_table(rows, columns, report_path.parent / filename))
    log_event(LOGGER, "plotdata.complete", report=str(report_path), files=len(written))
    return written
