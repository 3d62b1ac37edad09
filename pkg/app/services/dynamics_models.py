from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Union

import numpy as np

from app.utils.constants import HYPERBOLICITY_TOLERANCE

if TYPE_CHECKING:
    from app.services.shift_space import SymbolicPoint

Point = tuple[float, ...]
ExactPoint = tuple[Fraction, ...]
AnyPoint = Union[Point, ExactPoint, "SymbolicPoint"]


class SpaceKind(str, Enum):
    CIRCLE = "circle"
    TORUS2 = "torus2"
    SQUARE = "square"
    SHIFTSPACE = "shiftspace"


@dataclass(frozen=True, slots=True)
class PhaseSpace:
    kind: SpaceKind
    alphabet: int = 2

    @property
    def dim(self) -> int:
        if self.kind is SpaceKind.CIRCLE:
            return 1
        if self.kind is SpaceKind.SHIFTSPACE:
            return 0
        return 2

    @property
    def periodic(self) -> bool:
        return self.kind in (SpaceKind.CIRCLE, SpaceKind.TORUS2)

    @property
    def diameter(self) -> float:
        return {
            SpaceKind.CIRCLE: 0.5,
            SpaceKind.TORUS2: math.sqrt(2.0) / 2.0,
            SpaceKind.SQUARE: math.sqrt(2.0),
            SpaceKind.SHIFTSPACE: 1.0,
        }[self.kind]

    def wrap(self, point: Sequence[float]) -> tuple:
        """Reduce coordinates into the fundamental domain; exact for Fractions."""
        if not self.periodic:
            return tuple(point)
        wrapped = []
        for value in point:
            reduced = value % 1
            if isinstance(reduced, float) and reduced >= 1.0:
                reduced = 0.0
            wrapped.append(reduced)
        return tuple(wrapped)

    def displacement(self, p: Sequence[float], q: Sequence[float]) -> np.ndarray:
        """Shortest difference vector q - p, taken through the seam on periodic axes."""
        delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        if self.periodic:
            delta = delta - np.round(delta)
        return delta

    def distance(self, p: AnyPoint, q: AnyPoint) -> float:
        if self.kind is SpaceKind.SHIFTSPACE:
            return p.distance(q)  # type: ignore[union-attr]
        return float(np.linalg.norm(self.displacement(p, q)))  # type: ignore[arg-type]


CIRCLE = PhaseSpace(SpaceKind.CIRCLE)
TORUS2 = PhaseSpace(SpaceKind.TORUS2)
SQUARE = PhaseSpace(SpaceKind.SQUARE)
SHIFT2 = PhaseSpace(SpaceKind.SHIFTSPACE, alphabet=2)


def as_point(space: PhaseSpace, value: object) -> AnyPoint:
    """Accept scalars for the circle and sequences elsewhere."""
    if space.kind is SpaceKind.SHIFTSPACE:
        return value  # type: ignore[return-value]
    if isinstance(value, (int, float, Fraction)):
        value = (value,)
    point = tuple(value)  # type: ignore[arg-type]
    if len(point) != space.dim:
        raise ValueError(f"Expected a {space.dim}-D point on {space.kind.value}, got {point!r}")
    return point


@dataclass(frozen=True, slots=True)
class EigenData:
    """Spectrum of a derivative matrix, ordered by modulus."""

    eigenvalues: tuple[float, ...]
    matrix: tuple[tuple[float, ...], ...] = ()
    point: tuple | None = None
    period: int | None = None

    @classmethod
    def from_matrix(
        cls,
        matrix: np.ndarray | Sequence[Sequence[float]],
        *,
        point: tuple | None = None,
        period: int | None = None,
    ) -> EigenData:
        array = np.atleast_2d(np.asarray(matrix, dtype=float))
        values = np.linalg.eigvals(array)
        if np.any(np.abs(values.imag) > 1e-12):
            raise ValueError("Complex eigenvalues are outside the supported catalog")
        ordered = sorted((float(value.real) for value in values), key=lambda v: (abs(v), v))
        return cls(
            eigenvalues=tuple(ordered),
            matrix=tuple(tuple(float(entry) for entry in row) for row in array),
            point=point,
            period=period,
        )

    @classmethod
    def from_values(cls, values: Sequence[float]) -> EigenData:
        ordered = sorted((float(value) for value in values), key=lambda v: (abs(v), v))
        diagonal = np.diag(ordered)
        return cls(
            eigenvalues=tuple(ordered),
            matrix=tuple(tuple(float(entry) for entry in row) for row in diagonal),
        )

    @property
    def hyperbolic(self) -> bool:
        return all(abs(abs(value) - 1.0) > HYPERBOLICITY_TOLERANCE for value in self.eigenvalues)

    @property
    def stable_count(self) -> int:
        return sum(1 for value in self.eigenvalues if abs(value) < 1.0)

    @property
    def trace(self) -> float:
        return float(np.trace(np.asarray(self.matrix))) if self.matrix else sum(self.eigenvalues)

    @property
    def determinant(self) -> float:
        if self.matrix:
            return float(np.linalg.det(np.asarray(self.matrix)))
        return float(np.prod(self.eigenvalues))


@dataclass(frozen=True)
class PeriodicPoint:
    point: AnyPoint
    period: int
    eigen: EigenData | None = None
    exact: ExactPoint | None = None
    word: tuple[int, ...] | None = None

    def sort_key(self) -> tuple:
        if self.word is not None:
            return (self.period, 0, self.word)
        coordinates = tuple(float(value) for value in self.point)  # type: ignore[union-attr]
        return (self.period, 1, coordinates)
