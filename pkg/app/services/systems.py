from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from app.services.dynamics_models import (
    CIRCLE,
    SHIFT2,
    SQUARE,
    TORUS2,
    AnyPoint,
    EigenData,
    ExactPoint,
    PeriodicPoint,
    PhaseSpace,
    SpaceKind,
    as_point,
)
from app.services.errors import LabError
from app.services.shift_space import SymbolicPoint, is_primitive, words
from app.utils.config import load_runtime_config
from app.utils.constants import (
    MAX_PERIOD_2D,
    NEWTON_DAMPING,
    NEWTON_MAX_ITERATIONS,
    NEWTON_SEEDS_PER_AXIS,
    NEWTON_STEP_LIMIT,
    PERIOD_MINIMALITY_TOLERANCE,
    POINT_TOLERANCE,
)
from app.utils.logging import get_logger, log_event, log_timing

LOGGER = get_logger(__name__)

FIFTH = Fraction(1, 5)
FOUR_FIFTHS = Fraction(4, 5)
IntMatrix = tuple[tuple[int, int], tuple[int, int]]


class UnknownSystemError(LabError):
    """Raised for system ids outside the catalog."""


class ParameterRangeError(LabError):
    """Raised when a system parameter is unknown or outside its documented range."""


class OrbitEscapeError(LabError):
    """Raised when an orbit leaves the domain of a partial map."""

    def __init__(self, index: int, point: object) -> None:
        super().__init__(f"Orbit leaves the map domain at index {index} (point {point!r})")
        self.index = index
        self.point = point


class DomainError(LabError):
    """Raised when an operation is asked for outside the phase space it supports."""


@dataclass(frozen=True, slots=True)
class ParameterRange:
    default: float
    low: float
    high: float

    def contains(self, value: float) -> bool:
        return self.low < value < self.high


SYSTEM_PARAMETERS: dict[str, dict[str, ParameterRange]] = {
    "cat": {},
    "north_south": {"amplitude": ParameterRange(0.1, 0.0, 1.0 / (2.0 * math.pi))},
    "grad2": {"amplitude": ParameterRange(0.1, 0.0, 1.0 / (2.0 * math.pi))},
    "grad4": {"amplitude": ParameterRange(0.05, 0.0, 1.0 / (4.0 * math.pi))},
    "horseshoe": {},
    "full_shift": {},
}


@dataclass(frozen=True, slots=True)
class MapKernel:
    """Vectorized evaluation on arrays of shape (m, dim).

    `lift` returns unwrapped images, so differences of lifted values are honest displacements.
    `strips` lists the y-ranges of the domain pieces of a partial map (empty = whole space).
    `exact_corners` marks maps whose corner bounding box contains the whole box image.
    """

    lift: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    strips: tuple[tuple[float, float], ...] = ()
    exact_corners: bool = True


@dataclass(frozen=True)
class CatalogSystem:
    id: str
    space: PhaseSpace
    lipschitz: float
    params: Mapping[str, float]
    map_eval: Callable[[AnyPoint], AnyPoint | None]
    inverse_eval: Callable[[AnyPoint], AnyPoint | None]
    derivative_eval: Callable[[AnyPoint], np.ndarray]
    kernel: MapKernel | None = None
    matrix: IntMatrix | None = None
    partial: bool = False
    notes: Mapping[str, str] = field(default_factory=dict)

    def forward(self, points: np.ndarray) -> np.ndarray:
        """Vectorized map on an (m, dim) array, wrapped into the fundamental domain."""
        if self.kernel is None:
            raise DomainError(f"System {self.id} has no vectorized kernel")
        images = self.kernel.lift(np.asarray(points, dtype=float))
        if self.space.periodic:
            images = np.mod(images, 1.0)
            images[images >= 1.0] = 0.0
        return images


# ---- catalog building blocks ----
@dataclass(frozen=True, slots=True)
class SineFactor:
    """Circle map x -> x + amplitude * sin(2 pi frequency x) and its lift."""

    amplitude: float
    frequency: int

    def value(self, x: np.ndarray | float) -> np.ndarray | float:
        return x + self.amplitude * np.sin(2.0 * np.pi * self.frequency * x)

    def slope(self, x: np.ndarray | float) -> np.ndarray | float:
        scale = 2.0 * np.pi * self.frequency
        return 1.0 + self.amplitude * scale * np.cos(scale * x)

    def invert(self, y: np.ndarray | float) -> np.ndarray | float:
        x = np.array(y, dtype=float)
        for _ in range(60):
            step = (self.value(x) - y) / self.slope(x)
            x = x - step
            if np.all(np.abs(step) < 1e-16):
                break
        return x if np.ndim(x) else float(x)

    @property
    def lipschitz(self) -> float:
        return 1.0 + 2.0 * math.pi * self.frequency * self.amplitude


def _wrap_scalar(value: float) -> float:
    reduced = value % 1.0
    return 0.0 if reduced >= 1.0 else reduced


def _product_system(
    system_id: str, factor: SineFactor, params: Mapping[str, float]
) -> CatalogSystem:
    def lift(points: np.ndarray) -> np.ndarray:
        return np.column_stack([factor.value(points[:, 0]), factor.value(points[:, 1])])

    def jacobian(points: np.ndarray) -> np.ndarray:
        result = np.zeros((len(points), 2, 2))
        result[:, 0, 0] = factor.slope(points[:, 0])
        result[:, 1, 1] = factor.slope(points[:, 1])
        return result

    def map_eval(point: AnyPoint) -> AnyPoint:
        x, y = as_point(TORUS2, point)  # type: ignore[misc]
        return (_wrap_scalar(float(factor.value(x))), _wrap_scalar(float(factor.value(y))))

    def inverse_eval(point: AnyPoint) -> AnyPoint:
        x, y = as_point(TORUS2, point)  # type: ignore[misc]
        return (_wrap_scalar(float(factor.invert(x))), _wrap_scalar(float(factor.invert(y))))

    return CatalogSystem(
        id=system_id,
        space=TORUS2,
        lipschitz=factor.lipschitz,
        params=dict(params),
        map_eval=map_eval,
        inverse_eval=inverse_eval,
        derivative_eval=lambda point: jacobian(np.asarray([as_point(TORUS2, point)], float))[0],
        kernel=MapKernel(lift=lift, jacobian=jacobian),
    )


def _north_south(params: Mapping[str, float]) -> CatalogSystem:
    factor = SineFactor(params["amplitude"], 1)

    def lift(points: np.ndarray) -> np.ndarray:
        return factor.value(points)  # type: ignore[return-value]

    def jacobian(points: np.ndarray) -> np.ndarray:
        return np.asarray(factor.slope(points[:, 0])).reshape(-1, 1, 1)

    return CatalogSystem(
        id="north_south",
        space=CIRCLE,
        lipschitz=factor.lipschitz,
        params=dict(params),
        map_eval=lambda point: (_wrap_scalar(float(factor.value(as_point(CIRCLE, point)[0]))),),
        inverse_eval=lambda point: (
            _wrap_scalar(float(factor.invert(as_point(CIRCLE, point)[0]))),
        ),
        derivative_eval=lambda point: np.array([[factor.slope(float(as_point(CIRCLE, point)[0]))]]),
        kernel=MapKernel(lift=lift, jacobian=jacobian),
        notes={"source": "0", "sink": "1/2"},
    )


def _horseshoe_forward(point: AnyPoint) -> AnyPoint | None:
    x, y = point  # type: ignore[misc]
    if not (0 <= x <= 1 and 0 <= y <= 1):
        return None
    if y <= FIFTH:
        return (x / 5, 5 * y)
    if y >= FOUR_FIFTHS:
        return (x / 5 + FOUR_FIFTHS, 5 * y - 4)
    return None


def _horseshoe_backward(point: AnyPoint) -> AnyPoint | None:
    u, v = point  # type: ignore[misc]
    if not (0 <= u <= 1 and 0 <= v <= 1):
        return None
    if u <= FIFTH:
        return (5 * u, v / 5)
    if u >= FOUR_FIFTHS:
        return (5 * u - 4, v / 5 + FOUR_FIFTHS)
    return None


def _horseshoe(params: Mapping[str, float]) -> CatalogSystem:
    derivative = np.diag([0.2, 5.0])

    def lift(points: np.ndarray) -> np.ndarray:
        upper = points[:, 1] >= 0.8
        return np.column_stack(
            [points[:, 0] / 5.0 + 0.8 * upper, 5.0 * points[:, 1] - 4.0 * upper]
        )

    def jacobian(points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(derivative, (len(points), 2, 2)).copy()

    return CatalogSystem(
        id="horseshoe",
        space=SQUARE,
        lipschitz=5.0,
        params=dict(params),
        map_eval=_horseshoe_forward,
        inverse_eval=_horseshoe_backward,
        derivative_eval=lambda point: derivative.copy(),
        kernel=MapKernel(lift=lift, jacobian=jacobian, strips=((0.0, 0.2), (0.8, 1.0))),
        partial=True,
    )


def _shift_derivative(point: AnyPoint) -> np.ndarray:
    raise DomainError("Shift spaces carry no derivative")


def _full_shift(params: Mapping[str, float]) -> CatalogSystem:
    return CatalogSystem(
        id="full_shift",
        space=SHIFT2,
        lipschitz=2.0,
        params=dict(params),
        map_eval=lambda point: point.shift(1),  # type: ignore[union-attr]
        inverse_eval=lambda point: point.shift(-1),  # type: ignore[union-attr]
        derivative_eval=_shift_derivative,
    )


# ---- toral automorphisms and partners ----
def _int_matmul(first: IntMatrix, second: IntMatrix) -> IntMatrix:
    (a, b), (c, d) = first
    (e, f), (g, h) = second
    return ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))


def _int_matpow(matrix: IntMatrix, power: int) -> IntMatrix:
    result: IntMatrix = ((1, 0), (0, 1))
    for _ in range(power):
        result = _int_matmul(result, matrix)
    return result


def toral_automorphism(
    matrix: Sequence[Sequence[int]], system_id: str = "automorphism"
) -> CatalogSystem:
    (a, b), (c, d) = ((int(row[0]), int(row[1])) for row in matrix)
    if (a, b, c, d) != tuple(float(v) for row in matrix for v in row):
        raise ParameterRangeError("Toral automorphisms need integer matrices")
    det = a * d - b * c
    if abs(det) != 1:
        raise ParameterRangeError(f"Toral automorphisms need determinant +-1, got {det}")
    array = np.array([[a, b], [c, d]], dtype=float)
    inverse = ((d * det, -b * det), (-c * det, a * det))

    def map_eval(point: AnyPoint) -> AnyPoint:
        x, y = as_point(TORUS2, point)  # type: ignore[misc]
        return TORUS2.wrap((a * x + b * y, c * x + d * y))

    def inverse_eval(point: AnyPoint) -> AnyPoint:
        x, y = as_point(TORUS2, point)  # type: ignore[misc]
        (p, q), (r, s) = inverse
        return TORUS2.wrap((p * x + q * y, r * x + s * y))

    return CatalogSystem(
        id=system_id,
        space=TORUS2,
        lipschitz=float(np.linalg.norm(array, 2)),
        params={},
        map_eval=map_eval,
        inverse_eval=inverse_eval,
        derivative_eval=lambda point: array.copy(),
        kernel=MapKernel(
            lift=lambda points: points @ array.T,
            jacobian=lambda points: np.broadcast_to(array, (len(points), 2, 2)).copy(),
        ),
        matrix=((a, b), (c, d)),
    )


def _cat(params: Mapping[str, float]) -> CatalogSystem:
    return toral_automorphism(((2, 1), (1, 1)), "cat")


def power_system(system: CatalogSystem, power: int) -> CatalogSystem:
    """The k-th iterate of a system, with chain-rule derivative and Lipschitz constant L^k."""
    if power < 1:
        raise ParameterRangeError("Powers must be positive")
    if system.matrix is not None:
        return toral_automorphism(_int_matpow(system.matrix, power), f"{system.id}^{power}")

    Step = Callable[[AnyPoint], AnyPoint | None]

    def repeat(step: Step) -> Step:
        def composed(point: AnyPoint) -> AnyPoint | None:
            current: AnyPoint | None = point
            for _ in range(power):
                if current is None:
                    return None
                current = step(current)
            return current

        return composed

    def derivative_eval(point: AnyPoint) -> np.ndarray:
        product = np.eye(max(1, system.space.dim))
        current: AnyPoint | None = point
        for _ in range(power):
            if current is None:
                raise OrbitEscapeError(0, point)
            product = system.derivative_eval(current) @ product
            current = system.map_eval(current)
        return product

    kernel = None
    if system.kernel is not None and not system.kernel.strips:
        base = system.kernel

        def lift(points: np.ndarray) -> np.ndarray:
            for _ in range(power):
                points = base.lift(points)
            return points

        def jacobian(points: np.ndarray) -> np.ndarray:
            _, product = compose_kernel(base, points, power)
            return product

        kernel = MapKernel(lift=lift, jacobian=jacobian, exact_corners=base.exact_corners)

    return CatalogSystem(
        id=f"{system.id}^{power}",
        space=system.space,
        lipschitz=system.lipschitz**power,
        params=dict(system.params),
        map_eval=repeat(system.map_eval),
        inverse_eval=repeat(system.inverse_eval),
        derivative_eval=derivative_eval,
        kernel=kernel,
        partial=system.partial,
    )


def identity_system(space: PhaseSpace) -> CatalogSystem:
    if space.kind is SpaceKind.TORUS2:
        return toral_automorphism(((1, 0), (0, 1)), "identity")
    dim = max(1, space.dim)
    return CatalogSystem(
        id="identity",
        space=space,
        lipschitz=1.0,
        params={},
        map_eval=lambda point: point,
        inverse_eval=lambda point: point,
        derivative_eval=lambda point: np.eye(dim),
        kernel=MapKernel(
            lift=lambda points: np.array(points, dtype=float),
            jacobian=lambda points: np.broadcast_to(np.eye(dim), (len(points), dim, dim)).copy(),
        ),
    )


def swap_system(space: PhaseSpace = TORUS2) -> CatalogSystem:
    if space.kind is not SpaceKind.TORUS2:
        raise DomainError("The coordinate swap needs the 2-torus")
    return toral_automorphism(((0, 1), (1, 0)), "swap")


def resolve_partner(system: CatalogSystem, spec: str) -> CatalogSystem:
    """Parse partner names used by scenarios: power:k, identity, swap, automorphism:a,b,c,d."""
    name, _, argument = spec.partition(":")
    name = name.strip().lower()
    if name == "power":
        return power_system(system, int(argument or 1))
    if name == "identity":
        return identity_system(system.space)
    if name == "swap":
        return swap_system(system.space)
    if name == "automorphism":
        entries = [int(part) for part in argument.split(",")]
        if len(entries) != 4:
            raise ParameterRangeError("automorphism partners need four integer entries")
        return toral_automorphism((entries[:2], entries[2:]))
    raise UnknownSystemError(f"Unknown partner '{spec}'")


_BUILDERS: dict[str, Callable[[Mapping[str, float]], CatalogSystem]] = {
    "cat": _cat,
    "north_south": _north_south,
    "grad2": lambda params: _product_system("grad2", SineFactor(params["amplitude"], 1), params),
    "grad4": lambda params: _product_system("grad4", SineFactor(params["amplitude"], 2), params),
    "horseshoe": _horseshoe,
    "full_shift": _full_shift,
}


def _resolve_params(system_id: str, params: Mapping[str, float]) -> dict[str, float]:
    ranges = SYSTEM_PARAMETERS[system_id]
    unknown = sorted(set(params) - set(ranges))
    if unknown:
        raise ParameterRangeError(f"Unknown parameters for {system_id}: {', '.join(unknown)}")
    resolved: dict[str, float] = {}
    for name, allowed in ranges.items():
        value = float(params.get(name, allowed.default))
        if not allowed.contains(value):
            raise ParameterRangeError(
                f"Parameter {name}={value} outside ({allowed.low:.6g}, {allowed.high:.6g})"
            )
        resolved[name] = value
    return resolved


def build_system(system_id: str, params: Mapping[str, float] | None = None) -> CatalogSystem:
    if system_id not in _BUILDERS:
        raise UnknownSystemError(
            f"Unknown system '{system_id}'; expected one of {', '.join(sorted(_BUILDERS))}"
        )
    return _BUILDERS[system_id](_resolve_params(system_id, params or {}))


# ---- metric helpers ----
def distance(space: PhaseSpace, p: AnyPoint, q: AnyPoint) -> float:
    """Canonical metric of the phase space (wrap-around on periodic axes, 2^-i on shifts)."""
    return space.distance(p, q)


def phase_diameter(space: PhaseSpace) -> float:
    return space.diameter


# ---- orbits ----
def iterate_orbit(system: CatalogSystem, x: object, n: int) -> list[AnyPoint]:
    """(x, f(x), ..., f^n(x)), or inverse iterates when n < 0."""
    point = as_point(system.space, x)
    if system.space.periodic:
        point = system.space.wrap(point)  # type: ignore[arg-type]
    step = system.map_eval if n >= 0 else system.inverse_eval
    orbit = [point]
    for index in range(abs(n)):
        image = step(orbit[-1])
        if image is None:
            raise OrbitEscapeError(index, orbit[-1])
        orbit.append(image)
    return orbit


def compose_kernel(
    kernel: MapKernel, points: np.ndarray, power: int
) -> tuple[np.ndarray, np.ndarray]:
    """Lifted image and Jacobian of the power-th iterate at each row of `points`."""
    current = np.asarray(points, dtype=float)
    dim = current.shape[1]
    product = np.broadcast_to(np.eye(dim), (len(current), dim, dim)).copy()
    for _ in range(power):
        product = kernel.jacobian(current) @ product
        current = kernel.lift(current)
    return current, product


# ---- periodic points ----
def horseshoe_coordinates(point: SymbolicPoint) -> ExactPoint:
    """Exact horseshoe point with the given itinerary.

    x = (4/5) sum_{k>=1} s_{-k} 5^(1-k) and y = (4/5) sum_{k>=0} s_k 5^(-k), summed as a finite
    prefix plus a geometric tail.
    """
    forward_prefix = max(0, len(point.core) - point.offset)
    tail = len(point.right)
    y_sum = sum(Fraction(point.symbol(k), 5**k) for k in range(forward_prefix))
    cycle = sum(Fraction(point.symbol(forward_prefix + j), 5**j) for j in range(tail))
    y_sum += Fraction(1, 5**forward_prefix) * cycle / (1 - Fraction(1, 5**tail))

    backward_prefix = max(0, point.offset)
    period = len(point.left)
    x_sum = sum(Fraction(point.symbol(-k), 5 ** (k - 1)) for k in range(1, backward_prefix + 1))
    cycle = sum(
        Fraction(point.symbol(-backward_prefix - j), 5 ** (j - 1)) for j in range(1, period + 1)
    )
    x_sum += Fraction(1, 5**backward_prefix) * cycle / (1 - Fraction(1, 5**period))
    return (FOUR_FIFTHS * x_sum, FOUR_FIFTHS * y_sum)


def lattice_fixed_points(matrix: IntMatrix) -> list[ExactPoint]:
    """All x in the torus with M x = 0 mod 1, one per coset of Z^2 / M Z^2.

    The image lattice projects onto g Z in the second coordinate (g = gcd of the second row) and
    meets the first axis in (|det| / g) Z, so the integer pairs (i, j) with 0 <= i < |det| / g and
    0 <= j < g are distinct coset representatives.
    """
    (p, q), (r, s) = matrix
    det = p * s - q * r
    if det == 0:
        raise LabError("Singular lattice: the automorphism has a unit eigenvalue")
    g = math.gcd(r, s)
    points: list[ExactPoint] = []
    for i in range(abs(det) // g):
        for j in range(g):
            x = Fraction(s * i - q * j, det) % 1
            y = Fraction(-r * i + p * j, det) % 1
            points.append((x, y))
    return points


def _exact_period(system: CatalogSystem, point: ExactPoint, bound: int) -> int | None:
    current: AnyPoint = point
    for step in range(1, bound + 1):
        current = system.map_eval(current)  # type: ignore[assignment]
        if current == point:
            return step
    return None


def _toral_periodic_points(system: CatalogSystem, n: int) -> list[PeriodicPoint]:
    assert system.matrix is not None
    found: dict[ExactPoint, PeriodicPoint] = {}
    for k in range(1, n + 1):
        power = _int_matpow(system.matrix, k)
        shifted: IntMatrix = ((power[0][0] - 1, power[0][1]), (power[1][0], power[1][1] - 1))
        eigen_matrix = np.array(power, dtype=float)
        for exact in lattice_fixed_points(shifted):
            if exact in found:
                continue
            period = _exact_period(system, exact, k)
            if period != k:
                continue
            point = (float(exact[0]), float(exact[1]))
            found[exact] = PeriodicPoint(
                point=point,
                period=k,
                eigen=EigenData.from_matrix(eigen_matrix, point=point, period=k),
                exact=exact,
            )
    return list(found.values())


def _symbolic_periodic_points(system: CatalogSystem, n: int) -> list[PeriodicPoint]:
    results: list[PeriodicPoint] = []
    for length in range(1, n + 1):
        for word in words(2, length):
            if not is_primitive(word):
                continue
            symbolic = SymbolicPoint.periodic(word)
            if system.id == "horseshoe":
                exact = horseshoe_coordinates(symbolic)
                point = (float(exact[0]), float(exact[1]))
                eigen = EigenData.from_matrix(
                    np.diag([5.0**-length, 5.0**length]), point=point, period=length
                )
                results.append(
                    PeriodicPoint(point=point, period=length, eigen=eigen, exact=exact, word=word)
                )
            else:
                results.append(PeriodicPoint(point=symbolic, period=length, word=word))
    return results


def _seed_grid(dim: int) -> np.ndarray:
    axis = (np.arange(NEWTON_SEEDS_PER_AXIS) + 0.5) / NEWTON_SEEDS_PER_AXIS
    if dim == 1:
        return axis.reshape(-1, 1)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel()])


def _newton_batch(system: CatalogSystem, seeds: np.ndarray, power: int) -> np.ndarray:
    kernel = system.kernel
    assert kernel is not None
    x = seeds.copy()
    dim = x.shape[1]
    converged = np.zeros(len(x), dtype=bool)
    alive = np.ones(len(x), dtype=bool)
    for _ in range(NEWTON_MAX_ITERATIONS):
        image, product = compose_kernel(kernel, x, power)
        residual = image - x
        residual -= np.round(residual)
        converged |= alive & (np.linalg.norm(residual, axis=1) < 1e-13)
        working = alive & ~converged
        if not working.any():
            break
        system_matrix = product[working] - np.eye(dim)
        regular = np.abs(np.linalg.det(system_matrix)) > 1e-12
        indices = np.flatnonzero(working)
        alive[indices[~regular]] = False
        if not regular.any():
            continue
        rhs = residual[indices[regular]][..., None]
        step = np.linalg.solve(system_matrix[regular], rhs)[..., 0]
        lengths = np.linalg.norm(step, axis=1)
        step[lengths > NEWTON_STEP_LIMIT] *= NEWTON_DAMPING
        x[indices[regular]] -= step
    return np.mod(x[converged], 1.0)


def _minimal_period(system: CatalogSystem, point: np.ndarray, bound: int) -> int | None:
    assert system.kernel is not None
    current = point.reshape(1, -1)
    for step in range(1, bound + 1):
        current = system.kernel.lift(current)
        delta = current[0] - point
        delta -= np.round(delta)
        if np.linalg.norm(delta) < PERIOD_MINIMALITY_TOLERANCE:
            return step
    return None


def _newton_periodic_points(system: CatalogSystem, n: int) -> list[PeriodicPoint]:
    seeds = _seed_grid(system.space.dim)
    threads = load_runtime_config().threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        batches = list(pool.map(lambda k: _newton_batch(system, seeds, k), range(1, n + 1)))

    accepted: list[tuple[np.ndarray, int]] = []
    for power, batch in enumerate(batches, start=1):
        for row in batch:
            row[row >= 1.0] = 0.0
            period = _minimal_period(system, row, power)
            if period is None:
                continue
            duplicate = any(
                known == period
                and np.linalg.norm(system.space.displacement(seen, row)) < POINT_TOLERANCE
                for seen, known in accepted
            )
            if not duplicate:
                accepted.append((row, period))

    assert system.kernel is not None
    results = []
    for row, period in accepted:
        _, product = compose_kernel(system.kernel, row.reshape(1, -1), period)
        point = tuple(float(value) for value in row)
        results.append(
            PeriodicPoint(
                point=point,
                period=period,
                eigen=EigenData.from_matrix(product[0], point=point, period=period),
            )
        )
    return results


def find_periodic_points(system: CatalogSystem, n: int) -> list[PeriodicPoint]:
    """All periodic points of minimal period <= n, in canonical (period, coordinates) order."""
    if n < 1:
        raise ParameterRangeError("Period bound must be positive")
    if system.space.dim == 2 and n > MAX_PERIOD_2D:
        raise ParameterRangeError(f"Period bound {n} exceeds {MAX_PERIOD_2D} for 2-D systems")
    with log_timing(LOGGER, "systems.periodic_points", system=system.id, bound=n):
        if system.matrix is not None:
            points = _toral_periodic_points(system, n)
        elif system.id == "horseshoe" or system.space.kind is SpaceKind.SHIFTSPACE:
            points = _symbolic_periodic_points(system, n)
        elif system.kernel is not None:
            points = _newton_periodic_points(system, n)
        else:
            raise DomainError(f"No periodic-point search available for {system.id}")
    points.sort(key=PeriodicPoint.sort_key)
    log_event(LOGGER, "systems.periodic_points.found", system=system.id, count=len(points))
    return points
