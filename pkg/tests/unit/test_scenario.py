from pathlib import Path

import pytest

from app.services.boxdyn import EnclosureMode
from app.services.scenario import ScenarioParseError, load_scenario, parse_scenario


def test_bare_names_and_inline_tables() -> None:
    scenario = parse_scenario(
        """
system = "cat"
resolution = 128
analyses = ["chainrec", {name = "centralizer", partner = "power:2", n = 2}]
"""
    )
    assert scenario.system.id == "cat"
    assert scenario.resolution == 128
    assert [spec.name for spec in scenario.analyses] == ["chainrec", "centralizer"]
    assert scenario.analyses[1].partner == "power:2"
    assert scenario.enclosure is EnclosureMode.CORNERS
    assert scenario.seed == 0


def test_system_table_with_params() -> None:
    scenario = parse_scenario(
        """
analyses = []
enclosure = "lipschitz"

[system]
id = "north_south"
params = { amplitude = 0.12 }
"""
    )
    assert scenario.system.params == {"amplitude": 0.12}
    assert scenario.enclosure is EnclosureMode.LIPSCHITZ
    assert scenario.analyses == []


def test_unknown_analysis_reports_its_position() -> None:
    text = 'system = "north_south"\nresolution = 64\nanalyses = ["chainrec", "bogus"]\n'
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario(text)
    assert excinfo.value.line == 3
    assert excinfo.value.column == text.splitlines()[2].find("bogus") + 1


def test_toml_syntax_errors_carry_line_and_column() -> None:
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario('system = "cat"\nresolution = = 64\n')
    assert excinfo.value.line == 2


def test_invalid_values_are_rejected() -> None:
    with pytest.raises(ScenarioParseError):
        parse_scenario('system = "cat"\nresolution = 100\n')
    with pytest.raises(ScenarioParseError):
        parse_scenario('system = "cat"\ncolour = "blue"\n')
    with pytest.raises(ScenarioParseError):
        parse_scenario('system = "cat"\nanalyses = [{name = "spectral", sweep = [48]}]\n')


def test_parameters_foreign_to_the_analysis_are_rejected() -> None:
    text = (
        'system = "cat"\nanalyses = [\n  "spectral",\n'
        '  { name = "chainrec", partner = "swap" },\n]\n'
    )
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario(text)
    assert "partner does not apply to analysis chainrec" in str(excinfo.value)
    assert excinfo.value.line == 4
    assert excinfo.value.column == text.splitlines()[3].find("partner") + 1
    with pytest.raises(ScenarioParseError):
        parse_scenario('system = "cat"\nanalyses = [{name = "shadow", sweep = [64]}]\n')


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ScenarioParseError):
        load_scenario(tmp_path / "absent.toml")


SHIPPED = Path(__file__).resolve().parents[2] / "scenarios"


@pytest.mark.parametrize(
    "name", ["north_south", "grad4", "cat", "horseshoe", "lemma53", "centralizer", "koenigs"]
)
def test_shipped_scenarios_load(name: str) -> None:
    scenario = load_scenario(SHIPPED / f"{name}.toml")
    assert scenario.analyses


def test_shipped_bogus_scenario_is_rejected() -> None:
    with pytest.raises(ScenarioParseError):
        load_scenario(SHIPPED / "bogus.toml")
