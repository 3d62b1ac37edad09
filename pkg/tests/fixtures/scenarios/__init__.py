from tests.fixtures.scenarios.factory import (
    CAT_SHADOW,
    GRAD4_VERDICTS,
    NORTH_SOUTH_SPECTRAL,
    ScenarioDefinition,
    write_scenario,
)

__all__ = [
    "CAT_SHADOW",
    "GRAD4_VERDICTS",
    "NORTH_SOUTH_SPECTRAL",
    "ScenarioDefinition",
    "write_scenario",
]
