from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True, slots=True)
class ScenarioDefinition:
    """Declarative scenario rendered to TOML for runner tests."""

    system: str
    analyses: Sequence[str]
    resolution: int = 64
    seed: int = 0
    params: dict[str, float] = field(default_factory=dict)
    extra_lines: Sequence[str] = ()

    def render(self) -> str:
        lines = [f"resolution = {self.resolution}", f"seed = {self.seed}"]
        lines.extend(self.extra_lines)
        lines.append("analyses = [" + ", ".join(self.analyses) + "]")
        lines.append("")
        lines.append("[system]")
        lines.append(f'id = "{self.system}"')
        if self.params:
            lines.append("[system.params]")
            lines.extend(f"{name} = {value}" for name, value in sorted(self.params.items()))
        return "\n".join(lines) + "\n"


NORTH_SOUTH_SPECTRAL = ScenarioDefinition(
    system="north_south", analyses=('"chainrec"', '"spectral"')
)
GRAD4_VERDICTS = ScenarioDefinition(
    system="grad4",
    resolution=128,
    analyses=('"chainrec"', '"spectral"', '"verdicts"'),
)
CAT_SHADOW = ScenarioDefinition(
    system="cat",
    analyses=('{name = "shadow", orbits = 5, length = 40}',),
)


def write_scenario(directory: Path, definition: ScenarioDefinition, name: str = "scenario") -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.toml"
    path.write_text(definition.render(), encoding="utf-8")
    return path
