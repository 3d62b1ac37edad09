"""One-dimensional Koenigs linearization of contracting germs.

Germs are written in a local coordinate centred on the fixed point, so iterates keep their relative
precision as they approach 0.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from app.services.errors import LabError, PreconditionError
from app.services.systems import CatalogSystem, DomainError
from app.utils.constants import KOENIGS_MAX_ITERATIONS, LINEARITY_DERIVATIVE_STEP
from app.utils.logging import get_logger, log_event

LOGGER = get_logger(__name__)

DEFAULT_TOLERANCE = 1e-12
INVERSE_MAX_ITERATIONS = 50

# Axis frequency of the sine-perturbed catalog systems.
_SINE_FREQUENCIES = {"north_south": 1, "grad2": 1, "grad4": 2}


class KoenigsConvergenceError(LabError):
    """Raised when a^-n g^n(x) has not settled within the iteration cap."""


class LinearityHypothesisError(PreconditionError):
    """Raised when a map fails to commute with the linear contraction on the test grid."""


@dataclass(frozen=True)
class ContractionGerm:
    name: str
    step: Callable[[float], float]
    multiplier: float
    radius: float

    def __post_init__(self) -> None:
        if not 0.0 < abs(self.multiplier) < 1.0:
            raise PreconditionError(
                f"Germ {self.name} has multiplier {self.multiplier}, not a contraction"
            )


def contraction_germ(
    system: CatalogSystem, fixed_point: float | Fraction, *, radius: float = 0.05
) -> ContractionGerm:
    """Local map u -> g(u) at a sink of a sine-perturbed circle factor.

    At a fixed point c, sin(2 pi k c) = 0, so x + A sin(2 pi k x) becomes u + A cos(2 pi k c)
    sin(2 pi k u) in the coordinate u = x - c.
    """
    if system.id not in _SINE_FREQUENCIES:
        raise DomainError(f"No one-dimensional germ is available for {system.id}")
    amplitude = float(system.params["amplitude"])
    frequency = _SINE_FREQUENCIES[system.id]
    phase = 2.0 * math.pi * frequency * float(fixed_point)
    if abs(math.sin(phase)) > 1e-12:
        raise PreconditionError(f"{fixed_point} is not a fixed point of the {system.id} factor")
    weight = amplitude * math.cos(phase)
    angular = 2.0 * math.pi * frequency

    def step(u: float) -> float:
        return u + weight * math.sin(angular * u)

    return ContractionGerm(
        name=f"{system.id}@{fixed_point}",
        step=step,
        multiplier=1.0 + angular * weight,
        radius=radius,
    )


@dataclass(frozen=True)
class KoenigsValue:
    value: float
    multiplier: float
    iterations: int


def koenigs_linearize(
    germ: ContractionGerm, x: float, tol: float = DEFAULT_TOLERANCE
) -> KoenigsValue:
    """phi(x) = lim a^-n g^n(x), stopped once successive terms differ by less than tol."""
    a = germ.multiplier
    current = float(x)
    estimate = current
    for iteration in range(1, KOENIGS_MAX_ITERATIONS + 1):
        current = germ.step(current)
        following = current / a**iteration
        if not math.isfinite(following):
            break
        if abs(following - estimate) < tol:
            return KoenigsValue(following, a, iteration)
        estimate = following
    raise KoenigsConvergenceError(
        f"Koenigs iteration for {germ.name} at x={x} did not settle below {tol:g}"
    )


def koenigs_inverse(germ: ContractionGerm, y: float, tol: float = DEFAULT_TOLERANCE) -> float:
    """Newton solve of phi(x) = y with a centred-difference derivative."""
    h = LINEARITY_DERIVATIVE_STEP
    x = float(y)
    for _ in range(INVERSE_MAX_ITERATIONS):
        residual = koenigs_linearize(germ, x, tol).value - y
        if abs(residual) < tol:
            return x
        slope = (
            koenigs_linearize(germ, x + h, tol).value - koenigs_linearize(germ, x - h, tol).value
        ) / (2.0 * h)
        correction = residual / slope
        x -= correction
        if abs(correction) < tol:
            return x
    raise KoenigsConvergenceError(f"Inverse Koenigs map for {germ.name} did not converge at {y}")


def conjugacy_residual(
    germ: ContractionGerm, points: Sequence[float], tol: float = DEFAULT_TOLERANCE
) -> float:
    """max |phi(g(x)) - a phi(x)| over the points."""
    worst = 0.0
    for x in points:
        left = koenigs_linearize(germ, germ.step(x), tol).value
        right = germ.multiplier * koenigs_linearize(germ, x, tol).value
        worst = max(worst, abs(left - right))
    return worst


def working_grid(germ: ContractionGerm, count: int = 41) -> list[float]:
    return [float(v) for v in np.linspace(-germ.radius, germ.radius, count) if v != 0.0]


def conjugated_map(
    germ: ContractionGerm, partner: Callable[[float], float], tol: float
) -> Callable[[float], float]:
    """phi o h o phi^-1 in Koenigs coordinates."""

    def mapped(y: float) -> float:
        return koenigs_linearize(germ, partner(koenigs_inverse(germ, y, tol)), tol).value

    return mapped


@dataclass(frozen=True)
class LinearityResult:
    linear: bool
    slope: float
    residual: float
    commutation_residual: float
    constant: float

    def to_dict(self) -> dict[str, object]:
        return {
            "linear": self.linear,
            "slope": self.slope,
            "residual": self.residual,
            "commutation_residual": self.commutation_residual,
            "constant": self.constant,
        }


def linearity_test(
    G: Callable[[float], float], lam: float, grid: Sequence[float], tol: float
) -> LinearityResult:
    """A map commuting with x -> lam x near 0 must be linear; report how far G is from G'(0) x."""
    if not 0.0 < abs(lam) < 1.0:
        raise PreconditionError(f"lambda={lam} is not a contraction")
    commutation = max(abs(G(lam * x) - lam * G(x)) for x in grid)
    if commutation >= tol:
        raise LinearityHypothesisError(
            f"G does not commute with x -> {lam:g} x on the grid (residual {commutation:.3g})"
        )
    h = LINEARITY_DERIVATIVE_STEP
    slope = (G(h) - G(-h)) / (2.0 * h)
    residual = max(abs(G(x) - slope * x) for x in grid)
    result = LinearityResult(
        linear=residual < tol,
        slope=slope,
        residual=residual,
        commutation_residual=commutation,
        constant=residual / tol,
    )
    log_event(LOGGER, "koenigs.linearity", linear=result.linear, slope=slope, residual=residual)
    return result
