"""Invariant subsets of the full 2-shift and their locally maximal enclosures.

A subsystem is described by its generator words (periodic orbits whose closure is the set) and a
membership test for eventually periodic points. Generator words are indexed by their length.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace

from app.services.errors import LabError
from app.services.shift_space import (
    SymbolicPoint,
    Word,
    is_primitive,
    least_rotation,
    primitive_root,
    words,
)
from app.services.symbolic import NoConnectingPathError, Sft, connecting_path, sft_from_points
from app.services.systems import ParameterRangeError, build_system, power_system
from app.utils.constants import MAX_SYMBOLIC_WINDOW
from app.utils.logging import get_logger, log_event, log_timing

LOGGER = get_logger(__name__)

DEFAULT_ESCAPEES = 5
MAX_ESCAPEE_EXTENSIONS = 8


@dataclass(frozen=True)
class SubsystemSpec:
    name: str
    generator_words: Callable[[int], tuple[Word, ...]]
    contains: Callable[[SymbolicPoint], bool]
    power: int = 1

    def marked_points(self, limit: int) -> list[SymbolicPoint]:
        """Every point on the orbits of generator words of length <= limit."""
        points: list[SymbolicPoint] = []
        for word in self.generator_words(limit):
            points.extend(SymbolicPoint.periodic(word, offset=r) for r in range(len(word)))
        return points


def _lyndon_words(limit: int, allowed: Callable[[Word], bool]) -> tuple[Word, ...]:
    found = []
    for length in range(1, limit + 1):
        for word in words(2, length):
            if is_primitive(word) and least_rotation(word) == word and allowed(word):
                found.append(word)
    return tuple(found)


def _binary(point: SymbolicPoint) -> bool:
    return point.symbols_used() <= {0, 1}


def full_shift_spec() -> SubsystemSpec:
    return SubsystemSpec(
        name="full",
        generator_words=lambda limit: _lyndon_words(limit, lambda word: True),
        contains=_binary,
    )


def _no_double_one(word: Word) -> bool:
    cyclic = word + word[:1]
    return all(not (a == 1 and b == 1) for a, b in zip(cyclic, cyclic[1:]))


def golden_mean_spec() -> SubsystemSpec:
    return SubsystemSpec(
        name="golden",
        generator_words=lambda limit: _lyndon_words(limit, _no_double_one),
        contains=lambda point: _binary(point) and (1, 1) not in point.adjacent_pairs(),
    )


def _gap_words(limit: int) -> tuple[Word, ...]:
    found: list[Word] = [(0,)] if limit >= 1 else []
    found.extend((0,) * zeros + (1,) for zeros in range(1, limit))
    return tuple(found)


def _gap_contains(point: SymbolicPoint) -> bool:
    if not _binary(point):
        return False
    if set(point.left) == {0} and set(point.right) == {0}:
        return point.core.count(1) <= 1
    if point.is_periodic:
        root = primitive_root(point.right)
        return len(root) >= 2 and root.count(1) == 1
    return False


def gap_orbit_spec() -> SubsystemSpec:
    """Closure of the orbits of (0^k 1)^inf: those orbits plus every point with at most one 1."""
    return SubsystemSpec(name="gap", generator_words=_gap_words, contains=_gap_contains)


def power_spec(spec: SubsystemSpec, power: int) -> SubsystemSpec:
    """The same set viewed as invariant under shift^power."""
    if power < 1:
        raise ParameterRangeError("Powers must be positive")
    return replace(spec, name=f"{spec.name}^{power}", power=power)


SUBSYSTEM_FAMILIES: dict[str, Callable[[], SubsystemSpec]] = {
    "full": full_shift_spec,
    "golden": golden_mean_spec,
    "gap": gap_orbit_spec,
}


def subsystem_spec(name: str, power: int = 1) -> SubsystemSpec:
    if name not in SUBSYSTEM_FAMILIES:
        raise ParameterRangeError(
            f"Unknown subsystem family '{name}'; expected one of {', '.join(SUBSYSTEM_FAMILIES)}"
        )
    spec = SUBSYSTEM_FAMILIES[name]()
    return spec if power == 1 else power_spec(spec, power)


# ---- local product structure ----
@dataclass(frozen=True)
class LocalProductResult:
    holds: bool
    depth: int
    splices_checked: int
    witness: tuple[SymbolicPoint, SymbolicPoint, SymbolicPoint] | None = None

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "holds": self.holds,
            "depth": self.depth,
            "splices_checked": self.splices_checked,
        }
        if self.witness is not None:
            payload["witness"] = [str(point) for point in self.witness]
        return payload


def local_product_check(spec: SubsystemSpec, depth: int) -> LocalProductResult:
    """Splice every pair of marked points agreeing at coordinate 0 and test membership.

    shift^k has the same local stable and unstable sets as the shift, so `spec.power` does not
    change the outcome.
    """
    if not 1 <= depth <= MAX_SYMBOLIC_WINDOW:
        raise ParameterRangeError(f"Depth {depth} outside 1..{MAX_SYMBOLIC_WINDOW}")
    groups: dict[int, list[SymbolicPoint]] = {}
    for point in spec.marked_points(depth):
        groups.setdefault(point.symbol(0), []).append(point)

    checked = 0
    for symbol in sorted(groups):
        members = groups[symbol]
        for future in members:
            for past in members:
                if future is past:
                    continue
                checked += 1
                spliced = future.splice(past)
                if not spec.contains(spliced):
                    log_event(
                        LOGGER,
                        "subsystems.local_product",
                        spec=spec.name,
                        holds=False,
                        checked=checked,
                    )
                    return LocalProductResult(False, depth, checked, (future, past, spliced))
    log_event(LOGGER, "subsystems.local_product", spec=spec.name, holds=True, checked=checked)
    return LocalProductResult(True, depth, checked)


# ---- enclosing Markov systems ----
@dataclass(frozen=True)
class Escapee:
    n: int
    point: SymbolicPoint
    distance: float
    bound: float
    cycle: tuple[int, ...]
    power: int = 1

    def to_dict(self) -> dict[str, object]:
        return {
            "n": self.n,
            "point": str(self.point),
            "distance": self.distance,
            "bound": self.bound,
            "period": len(self.cycle) * self.power,
        }


@dataclass(frozen=True)
class MarkovEnclosure:
    spec_name: str
    nu: float
    index: int
    sft: Sft
    limit: SymbolicPoint
    partner: SymbolicPoint
    splice: SymbolicPoint
    escapees: tuple[Escapee, ...]

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": "enclosure",
            "spec": self.spec_name,
            "nu": self.nu,
            "index": self.index,
            "symbols": self.sft.size,
            "limit": str(self.limit),
            "partner": str(self.partner),
            "splice": str(self.splice),
            "escapees": [escapee.to_dict() for escapee in self.escapees],
        }


@dataclass(frozen=True)
class NegativeCertificate:
    spec_name: str
    nu: float
    index: int
    pairs_checked: int
    reason: str

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": "negative",
            "spec": self.spec_name,
            "nu": self.nu,
            "index": self.index,
            "pairs_checked": self.pairs_checked,
            "reason": self.reason,
        }


def nu_index(nu: float) -> int:
    """Smallest K with 2^-K < nu."""
    if not 0.0 < nu < 1.0:
        raise ParameterRangeError(f"nu={nu} must lie in (0, 1)")
    return math.floor(-math.log2(nu)) + 1


def _escapees(
    spec: SubsystemSpec,
    sft: Sft,
    limit: SymbolicPoint,
    partner: SymbolicPoint,
    splice: SymbolicPoint,
    count: int,
) -> list[Escapee]:
    """Cycles of the marked Sft that follow the splice for longer and longer stretches.

    Each Sft step is one application of shift^power, so a cycle of m symbols spells a word of
    m * power shift symbols.
    """
    index = {anchor: symbol for symbol, anchor in enumerate(sft.anchors)}
    step = sft.power
    period = math.lcm(limit.period or 1, step)
    lead = -(-(partner.period or 1) // step) * step

    def anchor_at(coordinate: int) -> int:
        source = limit if coordinate >= 0 else partner
        return index[source.shift(coordinate)]  # type: ignore[index]

    def spelled(cycle: Sequence[int]) -> Word:
        return tuple(
            symbol
            for state in cycle
            for symbol in sft.anchors[state].window(0, step)  # type: ignore[union-attr]
        )

    found: list[Escapee] = []
    previous = math.inf
    for n in range(1, count + 1):
        bound = sft.nu / 2**n  # type: ignore[operator]
        target = splice.shift(n * period)
        end = 2 * n * period - 1
        for _ in range(MAX_ESCAPEE_EXTENSIONS):
            path = [anchor_at(coordinate) for coordinate in range(-lead, end + 1, step)]
            closing = connecting_path(sft.matrix, path[-1], path[0])
            if closing is None:
                raise NoConnectingPathError(f"Escapee {n} cannot be closed into a cycle")
            cycle = tuple(path + closing[1:-1])
            candidate = SymbolicPoint.periodic(spelled(cycle), offset=lead + n * period)
            gap = candidate.distance(target)
            if gap < bound and gap < previous and not spec.contains(candidate):
                break
            end += period
        else:
            raise LabError(f"Escapee {n} did not separate from the limit orbit")
        found.append(Escapee(n, candidate, gap, bound, cycle, step))
        previous = gap
    return found


def enclosing_markov_system(
    spec: SubsystemSpec, nu: float, *, escapees: int = DEFAULT_ESCAPEES
) -> MarkovEnclosure | NegativeCertificate:
    """Mark the generator orbits needed for nu-density and look for points escaping the set.

    A splice of two nu-close marked points that leaves the set yields periodic points of the
    marked Sft converging to the limit orbit, each outside the set. Without such a splice the
    result is a negative certificate. For shift^k subsystems the transitions
    compare shift^k images, so every escapee is shift^k-periodic.
    """
    index = nu_index(nu)
    limit_length = index + 1
    if limit_length > MAX_SYMBOLIC_WINDOW:
        raise ParameterRangeError(
            f"nu={nu} needs generator words longer than {MAX_SYMBOLIC_WINDOW}"
        )

    with log_timing(LOGGER, "subsystems.enclosure", spec=spec.name, nu=nu):
        marked = spec.marked_points(limit_length)
        shift = power_system(build_system("full_shift"), spec.power)
        sft = replace(sft_from_points(shift, marked, nu, nu=nu), power=spec.power)
        checked = 0
        for limit in marked:
            for partner in marked:
                if limit is partner or limit.distance(partner) >= nu:
                    continue
                checked += 1
                spliced = limit.splice(partner)
                if spec.contains(spliced):
                    continue
                found = _escapees(spec, sft, limit, partner, spliced, escapees)
                log_event(
                    LOGGER,
                    "subsystems.escapees",
                    spec=spec.name,
                    limit=str(limit),
                    count=len(found),
                    distances=[escapee.distance for escapee in found],
                )
                return MarkovEnclosure(
                    spec_name=spec.name,
                    nu=nu,
                    index=index,
                    sft=sft,
                    limit=limit,
                    partner=partner,
                    splice=spliced,
                    escapees=tuple(found),
                )
    return NegativeCertificate(
        spec_name=spec.name,
        nu=nu,
        index=index,
        pairs_checked=checked,
        reason="every splice of nu-close marked points stays in the set",
    )


@dataclass(frozen=True)
class MaximalityResult:
    power: int
    local_product: LocalProductResult
    outcome: MarkovEnclosure | NegativeCertificate

    @property
    def locally_maximal(self) -> bool:
        return self.local_product.holds and isinstance(self.outcome, NegativeCertificate)

    def to_dict(self) -> dict[str, object]:
        return {
            "power": self.power,
            "local_product": self.local_product.to_dict(),
            "outcome": self.outcome.to_dict(),
            "locally_maximal": self.locally_maximal,
        }


def maximality_survey(
    family: str, *, powers: Sequence[int] = (1, 2, 3), depth: int = 8, nu: float = 2.0**-4
) -> list[MaximalityResult]:
    """Local product structure and escapee search for shift^k, k in `powers`."""
    results = []
    for power in powers:
        spec = subsystem_spec(family, power)
        results.append(
            MaximalityResult(
                power=power,
                local_product=local_product_check(spec, depth),
                outcome=enclosing_markov_system(spec, nu),
            )
        )
    return results
