from __future__ import annotations

from collections import deque
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy.sparse import csgraph

from app.services.dynamics_models import AnyPoint, PeriodicPoint, SpaceKind
from app.services.errors import LabError, PreconditionError
from app.services.shift_space import SymbolicPoint, Word, words
from app.services.systems import (
    FIFTH,
    FOUR_FIFTHS,
    CatalogSystem,
    DomainError,
    OrbitEscapeError,
    ParameterRangeError,
    horseshoe_coordinates,
)
from app.utils.constants import (
    HYPERBOLICITY_TOLERANCE,
    MAX_SYMBOLIC_WINDOW,
    SHADOW_AMBIGUITY_TOLERANCE,
)
from app.utils.logging import get_logger, log_event

LOGGER = get_logger(__name__)

BETA_SHADOW_WINDOW = 60
ETA_WINDOW = 6
TRANSVERSALITY_TOLERANCE = 1e-9


class EmptyMarkingError(LabError):
    """Raised when an Sft is requested from an empty set of marked points."""


class InadmissibleError(LabError):
    """Raised for words or points that use a forbidden transition."""


class NoConnectingPathError(LabError):
    """Raised when the transition graph has no path closing a word into a cycle."""


class BranchAmbiguityError(LabError):
    """Raised when a horseshoe pseudo-orbit does not determine its branch sequence."""


@dataclass(frozen=True, eq=False)
class Sft:
    """Subshift of finite type over symbols 0..N-1, each anchored to a marked point."""

    anchors: tuple[AnyPoint, ...]
    matrix: np.ndarray
    epsilon: float
    nu: float | None = None
    power: int = 1
    system_id: str = ""

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[int]] | np.ndarray) -> Sft:
        """Sft on plain symbols, anchored to the fixed points of the full shift."""
        array = np.asarray(matrix, dtype=np.int8)
        anchors = tuple(SymbolicPoint.periodic((symbol,)) for symbol in range(array.shape[0]))
        return cls(anchors=anchors, matrix=array, epsilon=0.0, system_id="full_shift")

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def successors(self, symbol: int) -> list[int]:
        return [int(target) for target in np.flatnonzero(self.matrix[symbol])]

    def admissible_word(self, word: Sequence[int]) -> bool:
        if any(not 0 <= symbol < self.size for symbol in word):
            return False
        return all(self.matrix[a, b] for a, b in zip(word, word[1:]))

    def admissible(self, point: SymbolicPoint) -> bool:
        return point.admissible(self.matrix)

    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.size))
        graph.add_edges_from((int(a), int(b)) for a, b in zip(*np.nonzero(self.matrix)))
        return graph


def sft_from_points(
    system: CatalogSystem,
    points: Sequence[AnyPoint],
    epsilon: float,
    *,
    nu: float | None = None,
) -> Sft:
    """Transition matrix a_ij = 1 exactly when d(f(p_i), p_j) < epsilon."""
    if not points:
        raise EmptyMarkingError("An Sft needs at least one marked point")
    space = system.space
    anchors = tuple(points)
    for i, first in enumerate(anchors):
        for second in anchors[i + 1 :]:
            if space.distance(first, second) == 0.0:
                raise PreconditionError(f"Marked points must be distinct; {first} repeats")
    images = [system.map_eval(point) for point in anchors]
    size = len(anchors)
    matrix = np.zeros((size, size), dtype=np.int8)
    for i, image in enumerate(images):
        if image is None:
            continue
        for j, target in enumerate(anchors):
            if space.distance(image, target) < epsilon:
                matrix[i, j] = 1
    log_event(LOGGER, "symbolic.sft", system=system.id, symbols=size, transitions=int(matrix.sum()))
    return Sft(anchors=anchors, matrix=matrix, epsilon=epsilon, nu=nu, system_id=system.id)


def prune(sft: Sft) -> tuple[Sft, tuple[int, ...]]:
    """Drop stranded symbols (no successor or no predecessor) until none remain."""
    kept = list(range(sft.size))
    matrix = sft.matrix.copy()
    while kept:
        rows = matrix.any(axis=1)
        cols = matrix.any(axis=0)
        alive = rows & cols
        if alive.all():
            break
        kept = [symbol for symbol, keep in zip(kept, alive) if keep]
        matrix = matrix[alive][:, alive]
    pruned = Sft(
        anchors=tuple(sft.anchors[symbol] for symbol in kept),
        matrix=matrix,
        epsilon=sft.epsilon,
        nu=sft.nu,
        power=sft.power,
        system_id=sft.system_id,
    )
    return pruned, tuple(kept)


def check_irreducible_primitive(sft: Sft) -> tuple[bool, bool]:
    """(transitive, mixing): strong connectivity, and a positive power within the Wielandt bound."""
    size = sft.size
    if size == 0:
        return (False, False)
    count, _ = csgraph.connected_components(sft.matrix, directed=True, connection="strong")
    transitive = count == 1 and bool(sft.matrix.any())
    if not transitive:
        return (False, False)
    bound = (size - 1) ** 2 + 1
    base = (sft.matrix > 0).astype(np.int64)
    power = base.copy()
    for _ in range(bound):
        if power.all():
            return (True, True)
        power = np.minimum(power @ base, 1)
    return (True, False)


def connecting_path(matrix: np.ndarray, source: int, target: int) -> list[int] | None:
    """Lexicographically least shortest path source -> ... -> target with at least one edge."""
    size = matrix.shape[0]
    distance = np.full(size, -1, dtype=np.int64)
    distance[target] = 0
    queue = deque([target])
    while queue:
        node = queue.popleft()
        for previous in np.flatnonzero(matrix[:, node]):
            if distance[previous] < 0:
                distance[previous] = distance[node] + 1
                queue.append(int(previous))

    options = [int(s) for s in np.flatnonzero(matrix[source]) if distance[s] >= 0]
    if not options:
        return None
    first = min(options, key=lambda s: (distance[s], s))
    path = [source, first]
    while path[-1] != target:
        current = path[-1]
        following = [
            int(s) for s in np.flatnonzero(matrix[current]) if distance[s] == distance[current] - 1
        ]
        path.append(min(following))
    return path


def periodic_density_witness(sft: Sft, word: Sequence[int]) -> SymbolicPoint:
    """A periodic point of the Sft whose orbit contains `word`.

    The word is closed into a cycle by the lexicographically least shortest connecting path from
    its last symbol back to its first. Its middle symbol sits at coordinate 0, so the witness lies
    within 2^-floor(len/2) of every point carrying the word at the same place.
    """
    word = tuple(word)
    if not word:
        raise InadmissibleError("The empty word has no witness")
    if not sft.admissible_word(word):
        raise InadmissibleError(f"Word {word} is not admissible")
    path = connecting_path(sft.matrix, word[-1], word[0])
    if path is None:
        raise NoConnectingPathError(f"No path closes {word} into a cycle")
    cycle = word + tuple(path[1:-1])
    center = (len(word) - 1) // 2
    return SymbolicPoint.periodic(cycle, offset=center)


# ---- beta and shadowing ----
@dataclass(frozen=True)
class BetaImage:
    point: AnyPoint
    eta: float


@dataclass(frozen=True)
class ShadowResult:
    orbit: tuple[tuple[float, ...], ...]
    residual: float
    distance: float
    max_error: float
    constant: float

    @property
    def bound(self) -> float:
        return self.constant * self.max_error


def _relabel(point: SymbolicPoint, table: Sequence[int]) -> SymbolicPoint:
    return SymbolicPoint(
        tuple(table[s] for s in point.left),
        tuple(table[s] for s in point.core),
        tuple(table[s] for s in point.right),
        point.offset,
    )


def _strip_bit(anchor: AnyPoint) -> int:
    _, height = anchor  # type: ignore[misc]
    return 0 if height <= FIFTH else 1


def _eta(system: CatalogSystem, sft: Sft, x: SymbolicPoint, image: AnyPoint) -> float:
    space = system.space
    worst = 0.0
    forward, backward = image, image
    for step in range(ETA_WINDOW + 1):
        worst = max(worst, space.distance(forward, sft.anchors[x.symbol(step)]))
        worst = max(worst, space.distance(backward, sft.anchors[x.symbol(-step)]))
        forward = system.map_eval(forward)
        backward = system.inverse_eval(backward)
        if forward is None or backward is None:
            break
    return float(worst)


def beta_map(sft: Sft, x: SymbolicPoint, system: CatalogSystem) -> BetaImage:
    """The phase point whose orbit follows the marked-point pseudo-orbit coded by x."""
    if not sft.admissible(x):
        raise InadmissibleError(f"{x} is not admissible")
    if system.space.kind is SpaceKind.SHIFTSPACE:
        table = [anchor.symbol(0) for anchor in sft.anchors]  # type: ignore[union-attr]
        image: AnyPoint = _relabel(x, table)
    elif system.id == "horseshoe":
        table = [_strip_bit(anchor) for anchor in sft.anchors]
        image = horseshoe_coordinates(_relabel(x, table))
    elif system.matrix is not None:
        pseudo = [
            sft.anchors[x.symbol(n)] for n in range(-BETA_SHADOW_WINDOW, BETA_SHADOW_WINDOW + 1)
        ]
        result = shadow_pseudo_orbit(system, pseudo)  # type: ignore[arg-type]
        return BetaImage(result.orbit[BETA_SHADOW_WINDOW], result.distance)
    else:
        raise DomainError(f"beta is not available for {system.id}")
    return BetaImage(image, _eta(system, sft, x, image))


def _toral_shadow(system: CatalogSystem, pseudo: np.ndarray) -> ShadowResult:
    matrix = np.array(system.matrix, dtype=float)
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(np.abs(values))
    values, vectors = values[order].real, vectors[:, order].real
    stable, unstable = values
    if not abs(stable) < 1.0 < abs(unstable):
        raise DomainError(f"{system.id} is not hyperbolic")
    inverse = np.linalg.inv(vectors)

    errors = pseudo[:-1] @ matrix.T - pseudo[1:]
    errors -= np.round(errors)
    coefficients = errors @ inverse.T
    count = len(pseudo)
    stable_part = np.zeros(count)
    unstable_part = np.zeros(count)
    for n in range(count - 1):
        stable_part[n + 1] = stable * stable_part[n] + coefficients[n, 0]
    for n in range(count - 2, -1, -1):
        unstable_part[n] = (unstable_part[n + 1] - coefficients[n, 1]) / unstable
    corrections = np.column_stack([stable_part, unstable_part]) @ vectors.T
    orbit = np.mod(pseudo + corrections, 1.0)

    steps = orbit[:-1] @ matrix.T - orbit[1:]
    steps -= np.round(steps)
    conditioning = np.linalg.norm(vectors, 2) * np.linalg.norm(inverse, 2)
    constant = conditioning * (1.0 / (1.0 - abs(stable)) + 1.0 / (abs(unstable) - 1.0))
    return ShadowResult(
        orbit=tuple(tuple(float(v) for v in row) for row in orbit),
        residual=float(np.linalg.norm(steps, axis=1).max(initial=0.0)),
        distance=float(np.linalg.norm(corrections - np.round(corrections), axis=1).max()),
        max_error=float(np.linalg.norm(errors, axis=1).max(initial=0.0)),
        constant=float(constant),
    )


def _horseshoe_branches(pseudo: np.ndarray) -> np.ndarray:
    branches = np.zeros(len(pseudo), dtype=np.int64)
    for index, (x, y) in enumerate(pseudo):
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise OrbitEscapeError(index, (float(x), float(y)))
        if y <= 0.2:
            branches[index] = 0
        elif y >= 0.8:
            branches[index] = 1
        elif y - 0.2 < SHADOW_AMBIGUITY_TOLERANCE or 0.8 - y < SHADOW_AMBIGUITY_TOLERANCE:
            raise BranchAmbiguityError(f"Point {index} sits on a strip boundary")
        else:
            raise OrbitEscapeError(index, (float(x), float(y)))
    return branches


def _horseshoe_shadow(pseudo: np.ndarray) -> ShadowResult:
    branches = _horseshoe_branches(pseudo)
    shifts = np.column_stack([0.8 * branches, -4.0 * branches])
    scale = np.array([0.2, 5.0])
    errors = pseudo[:-1] * scale + shifts[:-1] - pseudo[1:]
    count = len(pseudo)
    corrections = np.zeros((count, 2))
    for n in range(count - 1):
        corrections[n + 1, 0] = 0.2 * corrections[n, 0] + errors[n, 0]
    for n in range(count - 2, -1, -1):
        corrections[n, 1] = (corrections[n + 1, 1] - errors[n, 1]) / 5.0
    orbit = pseudo + corrections
    slack = SHADOW_AMBIGUITY_TOLERANCE
    if np.any((orbit[:, 1] > 0.2 + slack) & (orbit[:, 1] < 0.8 - slack)):
        raise BranchAmbiguityError("The corrected orbit leaves its strips")
    steps = orbit[:-1] * scale + shifts[:-1] - orbit[1:]
    return ShadowResult(
        orbit=tuple(tuple(float(v) for v in row) for row in orbit),
        residual=float(np.linalg.norm(steps, axis=1).max(initial=0.0)),
        distance=float(np.linalg.norm(corrections, axis=1).max()),
        max_error=float(np.linalg.norm(errors, axis=1).max(initial=0.0)),
        constant=1.0 / (1.0 - 0.2) + 0.2 / (1.0 - 0.2),
    )


def shadow_pseudo_orbit(system: CatalogSystem, pseudo: Sequence[Sequence[float]]) -> ShadowResult:
    """The true orbit closest to a pseudo-orbit of an affine hyperbolic system.

    Corrections solve u_(n+1) = Df u_n + e_n: stable components are summed forward from zero and
    unstable components backward from zero at the far end.
    """
    points = np.asarray(pseudo, dtype=float)
    if points.ndim != 2 or len(points) < 1:
        raise PreconditionError("A pseudo-orbit needs at least one point")
    if system.matrix is not None:
        result = _toral_shadow(system, points)
    elif system.id == "horseshoe":
        result = _horseshoe_shadow(points)
    else:
        raise DomainError(f"Shadowing needs an affine hyperbolic system, not {system.id}")
    log_event(
        LOGGER,
        "symbolic.shadow",
        system=system.id,
        length=len(points),
        residual=result.residual,
        distance=result.distance,
    )
    return result


def horseshoe_itinerary(point: Sequence[Fraction | float], forward: int, backward: int = 0) -> Word:
    """Strip symbols s_-backward .. s_(forward-1) of a horseshoe point."""
    x, y = point
    past: list[int] = []
    u, v = x, y
    for index in range(backward):
        if u <= FIFTH:
            past.append(0)
            u, v = 5 * u, v / 5
        elif u >= FOUR_FIFTHS:
            past.append(1)
            u, v = 5 * u - 4, v / 5 + FOUR_FIFTHS
        else:
            raise OrbitEscapeError(-index - 1, (u, v))
    future: list[int] = []
    u, v = x, y
    for index in range(forward):
        if v <= FIFTH:
            future.append(0)
            u, v = u / 5, 5 * v
        elif v >= FOUR_FIFTHS:
            future.append(1)
            u, v = u / 5 + FOUR_FIFTHS, 5 * v - 4
        else:
            raise OrbitEscapeError(index, (u, v))
    return tuple(reversed(past)) + tuple(future)


# ---- homoclinic points ----
@dataclass(frozen=True)
class HomoclinicGrid:
    """Points homoclinic to a horseshoe fixed point, equal to it outside a symbol window.

    The x-coordinate depends only on past symbols and the y-coordinate only on future ones, so the
    set is a product grid minus the fixed point itself.
    """

    fixed_symbol: int
    window: int
    stable_coords: tuple[Fraction, ...]
    unstable_coords: tuple[Fraction, ...]
    anchor: tuple[Fraction, Fraction]
    transverse: bool
    min_distance: Fraction = field(default=Fraction(0))

    @property
    def count(self) -> int:
        return len(self.stable_coords) * len(self.unstable_coords) - 1

    def points(self) -> Iterator[tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]]:
        px, py = self.anchor
        for s in self.stable_coords:
            for u in self.unstable_coords:
                if s == 0 and u == 0:
                    continue
                yield ((px + s, py + u), (s, u))


def _min_gap(values: Sequence[Fraction]) -> Fraction | None:
    ordered = sorted(values)
    gaps = [b - a for a, b in zip(ordered, ordered[1:])]
    return min(gaps) if gaps else None


def _transverse_at(system: CatalogSystem, anchor: tuple[Fraction, Fraction]) -> bool:
    """Stable and unstable eigendirections of the derivative at `anchor` span the plane."""
    jacobian = np.asarray(system.derivative_eval(tuple(float(c) for c in anchor)), dtype=float)
    values, vectors = np.linalg.eig(jacobian)
    if np.any(np.abs(values.imag) > HYPERBOLICITY_TOLERANCE):
        return False
    moduli = np.abs(values.real)
    if np.any(np.abs(moduli - 1.0) <= HYPERBOLICITY_TOLERANCE):
        return False
    stable = vectors[:, moduli < 1.0].real
    unstable = vectors[:, moduli > 1.0].real
    if stable.shape[1] != 1 or unstable.shape[1] != 1:
        return False
    return abs(float(np.linalg.det(np.hstack([stable, unstable])))) > TRANSVERSALITY_TOLERANCE


def homoclinic_points(
    system: CatalogSystem, periodic: PeriodicPoint | int, window: int
) -> HomoclinicGrid:
    """Homoclinic points of a horseshoe fixed point with linearizing coordinate offsets."""
    if system.id != "horseshoe":
        raise DomainError("Homoclinic coordinates are implemented for the horseshoe")
    if not 1 <= window <= MAX_SYMBOLIC_WINDOW:
        raise ParameterRangeError(f"Window {window} outside 1..{MAX_SYMBOLIC_WINDOW}")
    if isinstance(periodic, PeriodicPoint):
        if periodic.word is None or len(periodic.word) != 1:
            raise PreconditionError("Homoclinic points need a horseshoe fixed point")
        symbol = periodic.word[0]
    else:
        symbol = int(periodic)
    if symbol not in (0, 1):
        raise PreconditionError(f"Unknown fixed-point symbol {symbol}")

    past_scale = 5**window
    future_scale = 5 ** (window + 1)
    xs = []
    for past in words(2, window):
        # past[k-1] is s_-k.
        total = sum(4 * bit * 5 ** (window - k) for k, bit in enumerate(past, start=1))
        xs.append(Fraction(total + symbol, past_scale))
    ys = []
    for future in words(2, window + 1):
        total = sum(4 * bit * 5 ** (window - k) for k, bit in enumerate(future))
        ys.append(Fraction(total + symbol, future_scale))
    anchor = (Fraction(symbol), Fraction(symbol))
    stable = tuple(sorted(x - anchor[0] for x in xs))
    unstable = tuple(sorted(y - anchor[1] for y in ys))
    gaps = [gap for gap in (_min_gap(stable), _min_gap(unstable)) if gap is not None]
    grid = HomoclinicGrid(
        fixed_symbol=symbol,
        window=window,
        stable_coords=stable,
        unstable_coords=unstable,
        anchor=anchor,
        transverse=_transverse_at(system, anchor),
        min_distance=min(gaps) if gaps else Fraction(0),
    )
    log_event(
        LOGGER,
        "symbolic.homoclinic",
        symbol=symbol,
        window=window,
        count=grid.count,
        transverse=grid.transverse,
        min_distance=str(grid.min_distance),
    )
    return grid


def sft_to_json(sft: Sft) -> dict[str, object]:
    def encode(anchor: AnyPoint) -> object:
        if isinstance(anchor, SymbolicPoint):
            return str(anchor)
        return [float(value) for value in anchor]  # type: ignore[union-attr]

    return {
        "symbols": [encode(anchor) for anchor in sft.anchors],
        "matrix": sft.matrix.astype(int).tolist(),
        "epsilon": sft.epsilon,
        "nu": sft.nu,
        "power": sft.power,
        "system": sft.system_id,
    }
