"""Scenario files: TOML text validated by a strict pydantic model."""

from __future__ import annotations

import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_core import PydanticCustomError

from app.services.boxdyn import EnclosureMode, valid_resolution
from app.services.errors import LabError

AnalysisName = Literal[
    "chainrec",
    "spectral",
    "verdicts",
    "sft",
    "shadow",
    "lemma53",
    "centralizer",
    "koenigs",
    "resonance",
]

_TOML_POSITION = re.compile(r"line (\d+), column (\d+)")

ANALYSIS_PARAMETERS: dict[str, frozenset[str]] = {
    "chainrec": frozenset(),
    "spectral": frozenset({"sweep"}),
    "verdicts": frozenset(),
    "sft": frozenset({"n", "epsilon", "samples"}),
    "shadow": frozenset({"orbits", "length", "noise"}),
    "lemma53": frozenset({"family", "nu_exponent", "escapees", "depth", "powers"}),
    "centralizer": frozenset({"partner", "n"}),
    "koenigs": frozenset({"tolerances", "fixed_point"}),
    "resonance": frozenset({"eigenvalues", "j_max", "n"}),
}


class ScenarioParseError(LabError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SystemSpec(BaseModel):
    id: str
    params: dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid", frozen=True)


class AnalysisSpec(BaseModel):
    """One pipeline step. Only the parameters listed for the named analysis are accepted."""

    name: AnalysisName
    partner: str = "power:2"
    n: Annotated[int, Field(ge=1)] = 2
    j_max: Annotated[int, Field(ge=2)] = 20
    sweep: list[int] = Field(default_factory=list)
    family: Literal["full", "golden", "gap"] = "gap"
    nu_exponent: Annotated[int, Field(ge=1, le=10)] = 4
    escapees: Annotated[int, Field(ge=1)] = 5
    depth: Annotated[int, Field(ge=1, le=12)] = 8
    powers: list[int] = Field(default_factory=lambda: [1])
    epsilon: float | None = None
    samples: Annotated[int, Field(ge=1)] = 200
    length: Annotated[int, Field(ge=2)] = 100
    orbits: Annotated[int, Field(ge=1)] = 100
    noise: Annotated[float, Field(ge=0.0)] = 1e-3
    fixed_point: float | None = None
    tolerances: list[float] = Field(default_factory=lambda: [1e-6, 1e-8, 1e-10])
    eigenvalues: list[float] | None = None

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _reject_foreign_parameters(cls, value: Any) -> Any:
        if not isinstance(value, dict):
            return value
        allowed = ANALYSIS_PARAMETERS.get(value.get("name"))  # type: ignore[arg-type]
        if allowed is None:
            return value
        for key in value:
            if key != "name" and key in cls.model_fields and key not in allowed:
                raise PydanticCustomError(
                    "parameter_not_applicable",
                    "{key} does not apply to analysis {name}",
                    {"key": key, "name": value["name"]},
                )
        return value

    @field_validator("sweep")
    @classmethod
    def _check_sweep(cls, value: list[int]) -> list[int]:
        for resolution in value:
            if not valid_resolution(resolution):
                raise ValueError(f"sweep resolution {resolution} is not supported")
        return value


class Scenario(BaseModel):
    system: SystemSpec
    resolution: int = 64
    epsilon: Annotated[float, Field(ge=0.0)] = 0.0
    enclosure: EnclosureMode = EnclosureMode.CORNERS
    analyses: list[AnalysisSpec] = Field(default_factory=list)
    output_dir: str | None = None
    seed: int = 0

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("system", mode="before")
    @classmethod
    def _system_from_name(cls, value: Any) -> Any:
        return {"id": value} if isinstance(value, str) else value

    @field_validator("analyses", mode="before")
    @classmethod
    def _analyses_from_names(cls, value: Any) -> Any:
        if not isinstance(value, list):
            return value
        return [{"name": item} if isinstance(item, str) else item for item in value]

    @field_validator("resolution")
    @classmethod
    def _check_resolution(cls, value: int) -> int:
        if not valid_resolution(value):
            raise ValueError(f"resolution {value} must be a power of 2 or 5 in [16, 1024]")
        return value


def _locate(text: str, error: dict[str, Any]) -> tuple[int, int]:
    """Best-effort position of a validation error: the offending value, else its key."""
    key = (error.get("ctx") or {}).get("key")
    if isinstance(key, str):
        pattern = re.compile(rf"\b{re.escape(key)}\s*=")
        for number, line in enumerate(text.splitlines(), start=1):
            found = pattern.search(line)
            if found and not line.lstrip().startswith("#"):
                return number, found.start() + 1
    needles = []
    if isinstance(error.get("input"), (str, int, float)) and not isinstance(error["input"], bool):
        needles.append(str(error["input"]))
    needles.extend(str(part) for part in error.get("loc", ()) if isinstance(part, str))
    lines = text.splitlines()
    for needle in needles:
        for number, line in enumerate(lines, start=1):
            column = line.find(needle)
            if column >= 0 and not line.lstrip().startswith("#"):
                return number, column + 1
    return 1, 1


def parse_scenario(text: str) -> Scenario:
    try:
        payload = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_POSITION.search(str(exc))
        line, column = (int(match.group(1)), int(match.group(2))) if match else (1, 1)
        raise ScenarioParseError(str(exc).split(" (at")[0], line, column) from exc
    try:
        return Scenario.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        line, column = _locate(text, first)
        where = ".".join(str(part) for part in first["loc"])
        raise ScenarioParseError(f"{where}: {first['msg']}", line, column) from exc


def load_scenario(path: Path) -> Scenario:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"Cannot read scenario {path}: {exc.strerror}", 0, 0) from exc
    return parse_scenario(text)
