import json
from pathlib import Path

import pandas as pd
import pytest

from app.services.plotdata import MissingReportError, emit_plotdata


def _write_report(directory: Path, analyses: list[dict[str, object]]) -> Path:
    path = directory / "report.json"
    path.write_text(json.dumps({"schema": "hyperbolic-lab/1", "analyses": analyses}), "utf-8")
    return path


def test_tables_for_present_analyses(tmp_path: Path) -> None:
    report = _write_report(
        tmp_path,
        [
            {"name": "spectral", "result": {"sweep": [{"resolution": 64, "coverage": 0.9}]}},
            {"name": "koenigs", "result": {"residuals": [{"tol": 1e-6, "residual": 3e-8}]}},
            {"name": "lemma53", "status": "error", "result": {}},
        ],
    )
    written = emit_plotdata(report)
    assert sorted(path.name for path in written) == ["basin_coverage.csv", "koenigs_residual.csv"]
    coverage = pd.read_csv(tmp_path / "basin_coverage.csv")
    assert coverage.to_dict("records") == [{"resolution": 64, "coverage": 0.9}]
    assert not (tmp_path / "escapee_distance.csv").exists()


def test_escapee_table(tmp_path: Path) -> None:
    escapees = [
        {"n": n, "distance": 2.0 ** -(8 + 2 * n), "bound": 2.0 ** -(4 + n), "point": "x"}
        for n in (1, 2, 3)
    ]
    report = _write_report(
        tmp_path, [{"name": "lemma53", "result": {"enclosure": {"escapees": escapees}}}]
    )
    emit_plotdata(report)
    frame = pd.read_csv(tmp_path / "escapee_distance.csv")
    assert list(frame.columns) == ["n", "distance", "bound"]
    assert frame["n"].tolist() == [1, 2, 3]


def test_empty_report_writes_nothing(tmp_path: Path) -> None:
    assert emit_plotdata(_write_report(tmp_path, [])) == []
    assert sorted(path.name for path in tmp_path.iterdir()) == ["report.json"]


def test_missing_or_foreign_report(tmp_path: Path) -> None:
    with pytest.raises(MissingReportError):
        emit_plotdata(tmp_path / "report.json")
    foreign = tmp_path / "other.json"
    foreign.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(MissingReportError):
        emit_plotdata(foreign)
