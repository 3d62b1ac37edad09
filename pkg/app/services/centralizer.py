from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from app.services.dynamics_models import EigenData, PeriodicPoint, SpaceKind
from app.services.errors import PreconditionError
from app.services.shift_space import SymbolicPoint
from app.services.systems import (
    CatalogSystem,
    DomainError,
    ParameterRangeError,
    find_periodic_points,
)
from app.utils.constants import (
    COMMUTATION_TOLERANCE,
    RESONANCE_J_MAX,
    RESONANCE_TOLERANCE,
    SIMILARITY_TOLERANCE,
)
from app.utils.logging import get_logger, log_event, log_timing

LOGGER = get_logger(__name__)

MIN_COMMUTATION_SAMPLES = 100
MANIFOLD_SAMPLES = 5
MANIFOLD_OFFSET = 1e-3
MANIFOLD_STEPS = 30
MANIFOLD_CONTRACTION = 1e-2
THETA_TOLERANCE = 1e-9


class NonCommutingError(PreconditionError):
    """Raised when a partner map does not commute with the base system on the samples."""


class UnitModulusError(PreconditionError):
    """Raised when an eigenvalue sits on the unit circle (or at zero)."""


# ---- commutation ----
def _shift_samples(count: int, seed: int) -> list[SymbolicPoint]:
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        left = tuple(int(v) for v in rng.integers(0, 2, size=int(rng.integers(1, 4))))
        core = tuple(int(v) for v in rng.integers(0, 2, size=8))
        right = tuple(int(v) for v in rng.integers(0, 2, size=int(rng.integers(1, 4))))
        samples.append(SymbolicPoint(left, core, right, 4))
    return samples


def commutation_residual(
    f: CatalogSystem, g: CatalogSystem, samples: int = 256, *, seed: int = 0
) -> float:
    """sup d(f(g(x)), g(f(x))) over quasi-uniform samples of the phase space."""
    if f.space != g.space:
        raise DomainError(f"{f.id} and {g.id} live on different phase spaces")
    if samples < MIN_COMMUTATION_SAMPLES:
        raise ParameterRangeError(f"Need at least {MIN_COMMUTATION_SAMPLES} samples")
    space = f.space
    if space.kind is SpaceKind.SHIFTSPACE:
        worst = 0.0
        for x in _shift_samples(samples, seed):
            left = f.map_eval(g.map_eval(x))  # type: ignore[arg-type]
            right = g.map_eval(f.map_eval(x))  # type: ignore[arg-type]
            worst = max(worst, space.distance(left, right))  # type: ignore[arg-type]
        return float(worst)

    points = qmc.Halton(d=space.dim, scramble=True, seed=seed).random(samples)
    kernels_ready = all(
        system.kernel is not None and not system.kernel.strips for system in (f, g)
    )
    if kernels_ready:
        first = f.forward(g.forward(points))
        second = g.forward(f.forward(points))
        deltas = np.array([space.displacement(a, b) for a, b in zip(first, second)])
        return float(np.linalg.norm(deltas, axis=1).max())

    worst = 0.0
    for row in points:
        x = tuple(float(v) for v in row)
        inner_g, inner_f = g.map_eval(x), f.map_eval(x)
        if inner_g is None or inner_f is None:
            continue
        left, right = f.map_eval(inner_g), g.map_eval(inner_f)
        if left is None or right is None:
            continue
        worst = max(worst, space.distance(left, right))
    return float(worst)


# ---- induced permutations on periodic points ----
@dataclass(frozen=True)
class CommutationReport:
    residual: float
    points: tuple[PeriodicPoint, ...]
    permutation: tuple[int | None, ...]
    similarity_ok: tuple[bool, ...]
    manifold_ok: tuple[bool, ...]

    @property
    def bijective(self) -> bool:
        images = [image for image in self.permutation if image is not None]
        return len(images) == len(self.points) and len(set(images)) == len(images)

    @property
    def passed(self) -> bool:
        return self.bijective and all(self.similarity_ok) and all(self.manifold_ok)

    def to_dict(self) -> dict[str, object]:
        return {
            "residual": self.residual,
            "points": [_describe(point) for point in self.points],
            "permutation": list(self.permutation),
            "similarity_ok": list(self.similarity_ok),
            "manifold_ok": list(self.manifold_ok),
            "bijective": self.bijective,
            "passed": self.passed,
        }


def _describe(point: PeriodicPoint) -> str:
    if point.exact is not None:
        return "(" + ", ".join(str(value) for value in point.exact) + ")"
    if isinstance(point.point, SymbolicPoint):
        return str(point.point)
    coordinates = point.point  # type: ignore[union-attr]
    return "(" + ", ".join(f"{float(value):.12g}" for value in coordinates) + ")"


def _match(
    space_system: CatalogSystem, image: object, points: Sequence[PeriodicPoint]
) -> int | None:
    space = space_system.space
    for index, candidate in enumerate(points):
        if candidate.exact is not None and isinstance(image, tuple) and image == candidate.exact:
            return index
    for index, candidate in enumerate(points):
        if space.distance(image, candidate.point) < SIMILARITY_TOLERANCE:  # type: ignore[arg-type]
            return index
    return None


def _similar(first: EigenData | None, second: EigenData | None) -> bool:
    if first is None or second is None:
        return first is second
    return (
        abs(first.trace - second.trace) < SIMILARITY_TOLERANCE
        and abs(first.determinant - second.determinant) < SIMILARITY_TOLERANCE
    )


def _orbit_distance(system: CatalogSystem, point: object, orbit: Sequence[object]) -> float:
    return min(system.space.distance(point, member) for member in orbit)  # type: ignore[arg-type]


def _offset_point(
    system: CatalogSystem, base: np.ndarray, vector: np.ndarray, t: float
) -> tuple[float, ...] | None:
    for sign in (1.0, -1.0):
        candidate = tuple(float(v) for v in base + sign * t * vector)
        if system.space.periodic:
            return system.space.wrap(candidate)
        if all(0.0 <= v <= 1.0 for v in candidate) and system.map_eval(candidate) is not None:
            return candidate
    return None


def _manifold_ok(f: CatalogSystem, g: CatalogSystem, p: PeriodicPoint, q: PeriodicPoint) -> bool:
    """Local stable (unstable) segments at p land on the stable (unstable) set of g(p)'s orbit."""
    if p.eigen is None or f.space.dim == 0:
        return True
    values, vectors = np.linalg.eig(np.asarray(p.eigen.matrix, dtype=float))
    orbit = [q.point]
    for _ in range(q.period - 1):
        orbit.append(f.map_eval(orbit[-1]))  # type: ignore[arg-type]
    base = np.asarray(p.point, dtype=float)

    for value, vector in zip(values.real, vectors.T.real):
        step = f.map_eval if abs(value) < 1.0 else f.inverse_eval
        for k in range(1, MANIFOLD_SAMPLES + 1):
            start_point = _offset_point(f, base, vector, MANIFOLD_OFFSET * k / MANIFOLD_SAMPLES)
            image = g.map_eval(start_point) if start_point is not None else None
            if image is None:
                return False
            start = best = _orbit_distance(f, image, orbit)
            current = image
            for _ in range(MANIFOLD_STEPS * p.period):
                current = step(current)
                if current is None:
                    break
                best = min(best, _orbit_distance(f, current, orbit))
            if best > MANIFOLD_CONTRACTION * start:
                return False
    return True


def periodic_permutation_check(
    f: CatalogSystem, g: CatalogSystem, n: int, *, seed: int = 0
) -> CommutationReport:
    """How g permutes the hyperbolic periodic points of f with period <= n."""
    residual = commutation_residual(f, g, seed=seed)
    if residual >= COMMUTATION_TOLERANCE:
        raise NonCommutingError(f"{g.id} does not commute with {f.id}: residual {residual:.3g}")
    with log_timing(LOGGER, "centralizer.permutation", system=f.id, partner=g.id, bound=n):
        periodic = [
            point
            for point in find_periodic_points(f, n)
            if point.eigen is None or point.eigen.hyperbolic
        ]
        if not periodic:
            raise PreconditionError(f"{f.id} has no hyperbolic periodic points up to period {n}")
        permutation: list[int | None] = []
        similarity: list[bool] = []
        manifolds: list[bool] = []
        for point in periodic:
            exact = point.exact is not None and g.matrix is not None
            source = point.exact if exact else point.point
            image_index = _match(f, g.map_eval(source), periodic)  # type: ignore[arg-type]
            permutation.append(image_index)
            if image_index is None:
                similarity.append(False)
                manifolds.append(False)
                continue
            image = periodic[image_index]
            similarity.append(_similar(point.eigen, image.eigen))
            manifolds.append(_manifold_ok(f, g, point, image))

    report = CommutationReport(
        residual=residual,
        points=tuple(periodic),
        permutation=tuple(permutation),
        similarity_ok=tuple(similarity),
        manifold_ok=tuple(manifolds),
    )
    log_event(
        LOGGER,
        "centralizer.permutation.result",
        system=f.id,
        partner=g.id,
        points=len(periodic),
        passed=report.passed,
    )
    return report


# ---- resonance ----
@dataclass(frozen=True)
class ResonanceReport:
    eigenvalues: tuple[float, ...]
    j_max: int
    witnesses: tuple[tuple[int, tuple[int, ...]], ...]
    distinct: bool
    min_gap: float
    complete: bool

    @property
    def nonresonant(self) -> bool:
        return self.distinct and not self.witnesses

    def to_dict(self) -> dict[str, object]:
        return {
            "eigenvalues": list(self.eigenvalues),
            "j_max": self.j_max,
            "nonresonant": self.nonresonant,
            "distinct": self.distinct,
            "witnesses": [{"index": i, "j": list(j)} for i, j in self.witnesses[:20]],
            "witness_count": len(self.witnesses),
            "min_gap": self.min_gap,
            "complete": self.complete,
        }


def nonresonance_check(
    eigen: EigenData | Sequence[float],
    j_max: int = RESONANCE_J_MAX,
    tol: float = RESONANCE_TOLERANCE,
) -> ResonanceReport:
    """Search lambda_i = prod lambda_k^j_k with sum j >= 2 on the log-magnitude lattice.

    Witness indices are 1-based to match the usual eigenvalue labels.
    """
    values = tuple(eigen.eigenvalues if isinstance(eigen, EigenData) else (float(v) for v in eigen))
    if any(value == 0.0 or abs(math.log(abs(value))) < tol for value in values):
        raise UnitModulusError(f"Eigenvalues {values} include zero or a unit-modulus value")
    logs = [math.log(abs(value)) for value in values]
    signs = [1 if value > 0 else -1 for value in values]
    distinct = all(
        abs(a - b) > tol * max(abs(a), abs(b)) for a, b in itertools.combinations(values, 2)
    )

    witnesses: list[tuple[int, tuple[int, ...]]] = []
    min_gap = math.inf
    for exponents in itertools.product(range(j_max + 1), repeat=len(values)):
        if sum(exponents) < 2:
            continue
        total = sum(j * log for j, log in zip(exponents, logs))
        sign = math.prod(s**j for s, j in zip(signs, exponents))
        for index, (log, target_sign) in enumerate(zip(logs, signs), start=1):
            if sign != target_sign:
                continue
            gap = abs(log - total) / max(1.0, abs(log))
            min_gap = min(min_gap, gap)
            if gap < tol:
                witnesses.append((index, exponents))

    same_sign = all(log < 0 for log in logs) or all(log > 0 for log in logs)
    magnitudes = [abs(log) for log in logs]
    complete = same_sign and math.ceil(max(magnitudes) / min(magnitudes)) <= j_max
    report = ResonanceReport(
        eigenvalues=values,
        j_max=j_max,
        witnesses=tuple(sorted(witnesses, key=lambda w: (sum(w[1]), w[1], w[0]))),
        distinct=distinct,
        min_gap=float(min_gap),
        complete=complete,
    )
    log_event(
        LOGGER,
        "centralizer.resonance",
        eigenvalues=list(values),
        nonresonant=report.nonresonant,
        witnesses=len(witnesses),
        complete=complete,
    )
    return report


# ---- eigenvalue group ----
@dataclass(frozen=True)
class ZElement:
    """(theta_1, theta_2, sign_1, sign_2): addition on theta, multiplication on signs."""

    theta: tuple[float, float]
    signs: tuple[int, int] = (1, 1)

    @classmethod
    def identity(cls) -> ZElement:
        return cls((0.0, 0.0), (1, 1))

    def __add__(self, other: ZElement) -> ZElement:
        return ZElement(
            (self.theta[0] + other.theta[0], self.theta[1] + other.theta[1]),
            (self.signs[0] * other.signs[0], self.signs[1] * other.signs[1]),
        )

    def __neg__(self) -> ZElement:
        return ZElement((-self.theta[0], -self.theta[1]), self.signs)

    def __sub__(self, other: ZElement) -> ZElement:
        return self + (-other)

    def scaled(self, count: int) -> ZElement:
        return ZElement(
            (count * self.theta[0], count * self.theta[1]),
            (self.signs[0] ** (count % 2), self.signs[1] ** (count % 2)),
        )

    def close_to(self, other: ZElement, tol: float = THETA_TOLERANCE) -> bool:
        return (
            self.signs == other.signs
            and abs(self.theta[0] - other.theta[0]) < tol
            and abs(self.theta[1] - other.theta[1]) < tol
        )


def chi(element: ZElement) -> tuple[float, float]:
    """Projection onto theta_1 + theta_2 = 0."""
    mean = 0.5 * (element.theta[0] + element.theta[1])
    return (element.theta[0] - mean, element.theta[1] - mean)


def z0_class(element: ZElement, generator: ZElement, tol: float = THETA_TOLERANCE) -> str:
    """identity, Z1 or Z0minusZ1 for the coset of element modulo the cyclic group of generator."""
    residual = chi(element)
    if abs(residual[0]) >= tol or abs(residual[1]) >= tol:
        return "Z0minusZ1"
    count = round(element.theta[0] / generator.theta[0]) if generator.theta[0] else 0
    if element.close_to(generator.scaled(count), tol):
        return "identity"
    return "Z1"


@dataclass(frozen=True)
class ThetaReport:
    element: ZElement
    generator: ZElement
    chi: tuple[float, float]
    z0_class: str

    @property
    def in_z1(self) -> bool:
        return self.z0_class != "Z0minusZ1"

    def row(self) -> dict[str, object]:
        return {
            "theta1": self.element.theta[0],
            "theta2": self.element.theta[1],
            "sign1": self.element.signs[0],
            "sign2": self.element.signs[1],
            "chi1": self.chi[0],
            "chi2": self.chi[1],
            "class": self.z0_class,
            "in_z1": self.in_z1,
        }


def _pair(values: EigenData | Sequence[float]) -> tuple[float, float]:
    pair = values.eigenvalues if isinstance(values, EigenData) else tuple(values)
    if len(pair) != 2:
        raise ParameterRangeError("Theta embedding needs eigenvalue pairs")
    return (float(pair[0]), float(pair[1]))


def theta_embed(
    mu: EigenData | Sequence[float], base: EigenData | Sequence[float]
) -> ThetaReport:
    """Exponents of mu relative to the base eigenvalues, with chi and the Z0 coset label."""
    lam = _pair(base)
    nu = _pair(mu)
    if any(abs(abs(value) - 1.0) < THETA_TOLERANCE or value == 0.0 for value in lam):
        raise UnitModulusError(f"Base eigenvalues {lam} must avoid the unit circle")
    if any(value == 0.0 for value in nu):
        raise ParameterRangeError("Theta embedding needs nonzero eigenvalues")
    element = ZElement(
        (
            math.log(abs(nu[0])) / math.log(abs(lam[0])),
            math.log(abs(nu[1])) / math.log(abs(lam[1])),
        ),
        (1 if nu[0] > 0 else -1, 1 if nu[1] > 0 else -1),
    )
    generator = ZElement((1.0, 1.0), (1 if lam[0] > 0 else -1, 1 if lam[1] > 0 else -1))
    return ThetaReport(
        element=element,
        generator=generator,
        chi=chi(element),
        z0_class=z0_class(element, generator),
    )


def partner_thetas(
    g: CatalogSystem, report: CommutationReport
) -> list[tuple[PeriodicPoint, ThetaReport]]:
    """Theta of g at each 2-D periodic point it fixes, measured against the return map."""
    rows: list[tuple[PeriodicPoint, ThetaReport]] = []
    for index, point in enumerate(report.points):
        eigen = point.eigen
        if report.permutation[index] != index or eigen is None or len(eigen.eigenvalues) != 2:
            continue
        values, vectors = np.linalg.eig(np.asarray(eigen.matrix, dtype=float))
        order = np.argsort(np.abs(values))
        partner = np.asarray(g.derivative_eval(point.point), dtype=float)
        directions = vectors.T[order].real
        mu = [float(v @ partner @ v / (v @ v)) for v in directions]
        rows.append((point, theta_embed(mu, values[order].real)))
    return rows
