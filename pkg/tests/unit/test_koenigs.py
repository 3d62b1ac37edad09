import math
from fractions import Fraction

import pytest

from app.services.errors import PreconditionError
from app.services.koenigs import (
    ContractionGerm,
    KoenigsConvergenceError,
    LinearityHypothesisError,
    conjugacy_residual,
    conjugated_map,
    contraction_germ,
    koenigs_inverse,
    koenigs_linearize,
    linearity_test,
    working_grid,
)
from app.services.systems import DomainError, build_system


@pytest.fixture(scope="module")
def sink_germ() -> ContractionGerm:
    return contraction_germ(build_system("north_south"), Fraction(1, 2))


def test_germ_multiplier(sink_germ: ContractionGerm) -> None:
    assert sink_germ.multiplier == pytest.approx(1.0 - 0.2 * math.pi)
    assert sink_germ.step(0.0) == 0.0


def test_germ_preconditions() -> None:
    north_south = build_system("north_south")
    with pytest.raises(PreconditionError):
        contraction_germ(north_south, 0)
    with pytest.raises(PreconditionError):
        contraction_germ(north_south, 0.3)
    with pytest.raises(DomainError):
        contraction_germ(build_system("cat"), 0)
    grad4 = contraction_germ(build_system("grad4"), 0.25)
    assert grad4.multiplier == pytest.approx(1.0 - 0.2 * math.pi)


def test_koenigs_map_conjugates_to_the_multiplier(sink_germ: ContractionGerm) -> None:
    grid = working_grid(sink_germ)
    assert 0.0 not in grid
    assert conjugacy_residual(sink_germ, grid) < 1e-10


def test_koenigs_inverse_round_trips(sink_germ: ContractionGerm) -> None:
    value = koenigs_linearize(sink_germ, 0.03).value
    assert koenigs_inverse(sink_germ, value) == pytest.approx(0.03, abs=1e-10)


def test_slow_germ_fails_to_settle() -> None:
    germ = ContractionGerm("slow", lambda u: 0.999 * u + u * u, 0.999, 0.05)
    with pytest.raises(KoenigsConvergenceError):
        koenigs_linearize(germ, 0.04)


def test_linearity_of_commuting_maps() -> None:
    grid = [x / 100 for x in range(-5, 6) if x]
    result = linearity_test(lambda x: 3.0 * x, 0.5, grid, 1e-9)
    assert result.linear
    assert result.slope == pytest.approx(3.0)
    with pytest.raises(LinearityHypothesisError):
        linearity_test(lambda x: x + x * x, 0.5, grid, 1e-9)
    with pytest.raises(PreconditionError):
        linearity_test(lambda x: x, 1.5, grid, 1e-9)


def test_germ_is_linear_in_koenigs_coordinates(sink_germ: ContractionGerm) -> None:
    mapped = conjugated_map(sink_germ, sink_germ.step, 1e-12)
    result = linearity_test(mapped, sink_germ.multiplier, working_grid(sink_germ)[::5], 1e-6)
    assert result.linear
    assert result.slope == pytest.approx(sink_germ.multiplier, rel=1e-5)


def test_quadratic_germ_linearizes_to_tolerance() -> None:
    germ = ContractionGerm("quadratic", lambda x: x / 2 + x * x / 4, 0.5, 0.1)
    grid = working_grid(germ)
    assert min(grid) == pytest.approx(-0.1)
    assert conjugacy_residual(germ, grid, 1e-12) < 1e-10
    mapped = conjugated_map(germ, germ.step, 1e-12)
    assert linearity_test(mapped, 0.5, grid[::5], 1e-6).linear
