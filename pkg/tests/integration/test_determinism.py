from __future__ import annotations

from pathlib import Path

from app.services.pipeline import run_scenario
from app.utils.constants import EXIT_OK
from tests.fixtures.scenarios import ScenarioDefinition, write_scenario

MIXED = ScenarioDefinition(
    system="cat",
    seed=11,
    analyses=('"chainrec"', '"spectral"', '{name = "shadow", orbits = 3, length = 20}'),
)


def _snapshot(directory: Path) -> dict[str, bytes]:
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


def test_same_seed_gives_identical_bytes(temp_data_root: Path, scenario_dir: Path) -> None:
    path = write_scenario(scenario_dir, MIXED)
    first, second = temp_data_root / "first", temp_data_root / "second"
    assert run_scenario(path, output_dir=first) == EXIT_OK
    assert run_scenario(path, output_dir=second) == EXIT_OK
    snapshot = _snapshot(first)
    assert snapshot == _snapshot(second)
    assert {"report.json", "box_graph.csv", "classes.csv", "order_graph.dot"} <= set(snapshot)


def test_seed_override_keeps_the_box_graph(temp_data_root: Path, scenario_dir: Path) -> None:
    path = write_scenario(scenario_dir, MIXED)
    base, other = temp_data_root / "base", temp_data_root / "other"
    run_scenario(path, output_dir=base)
    run_scenario(path, output_dir=other, seed=12)
    assert (base / "box_graph.csv").read_bytes() == (other / "box_graph.csv").read_bytes()
    assert b'"seed": 12' in (other / "report.json").read_bytes()
