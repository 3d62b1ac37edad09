from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from app.services.errors import PreconditionError
from app.services.shift_space import SymbolicPoint, words
from app.services.symbolic import (
    BranchAmbiguityError,
    EmptyMarkingError,
    InadmissibleError,
    NoConnectingPathError,
    Sft,
    beta_map,
    check_irreducible_primitive,
    connecting_path,
    homoclinic_points,
    horseshoe_itinerary,
    periodic_density_witness,
    prune,
    sft_from_points,
    sft_to_json,
    shadow_pseudo_orbit,
)
from app.services.systems import OrbitEscapeError, build_system

HORSESHOE_FIXED = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(1))]
GOLDEN = [[1, 1], [1, 0]]


def test_horseshoe_sft_depends_on_epsilon() -> None:
    horseshoe = build_system("horseshoe")
    loose = sft_from_points(horseshoe, HORSESHOE_FIXED, 1.5)
    tight = sft_from_points(horseshoe, HORSESHOE_FIXED, 0.5)
    assert loose.matrix.tolist() == [[1, 1], [1, 1]]
    assert tight.matrix.tolist() == [[1, 0], [0, 1]]
    payload = sft_to_json(loose)
    assert payload["symbols"] == [[0.0, 0.0], [1.0, 1.0]]
    assert payload["system"] == "horseshoe"


def test_sft_construction_errors() -> None:
    horseshoe = build_system("horseshoe")
    with pytest.raises(EmptyMarkingError):
        sft_from_points(horseshoe, [], 1.0)
    with pytest.raises(PreconditionError):
        sft_from_points(horseshoe, [HORSESHOE_FIXED[0], HORSESHOE_FIXED[0]], 1.0)


def test_prune_drops_stranded_symbols() -> None:
    pruned, kept = prune(Sft.from_matrix([[1, 1, 0], [0, 1, 0], [0, 0, 0]]))
    assert kept == (0, 1)
    assert pruned.matrix.tolist() == [[1, 1], [0, 1]]


def test_irreducibility_and_mixing() -> None:
    assert check_irreducible_primitive(Sft.from_matrix(GOLDEN)) == (True, True)
    assert check_irreducible_primitive(Sft.from_matrix([[0, 1], [1, 0]])) == (True, False)
    assert check_irreducible_primitive(Sft.from_matrix([[1, 1], [0, 1]])) == (False, False)


def test_connecting_path_is_shortest_and_least() -> None:
    cycle = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert connecting_path(cycle, 2, 0) == [2, 0]
    assert connecting_path(cycle, 0, 0) == [0, 1, 2, 0]
    assert connecting_path(np.ones((3, 3), dtype=int), 0, 0) == [0, 0]
    assert connecting_path(np.array([[0, 1], [0, 1]]), 1, 0) is None


def test_periodic_density_witness_contains_the_word() -> None:
    golden = Sft.from_matrix(GOLDEN)
    witness = periodic_density_witness(golden, (0, 1, 0))
    assert witness.window(-1, 2) == (0, 1, 0)
    assert golden.admissible(witness)
    assert periodic_density_witness(golden, (1,)).window(0, 2) == (1, 0)
    with pytest.raises(InadmissibleError):
        periodic_density_witness(golden, (1, 1))
    with pytest.raises(NoConnectingPathError):
        periodic_density_witness(Sft.from_matrix([[0, 1], [0, 1]]), (0,))


def test_beta_conjugates_shift_and_horseshoe() -> None:
    horseshoe = build_system("horseshoe")
    sft = sft_from_points(horseshoe, HORSESHOE_FIXED, 1.5)
    point = SymbolicPoint.parse("0|011|1@1")
    image = beta_map(sft, point, horseshoe)
    assert horseshoe.map_eval(image.point) == beta_map(sft, point.shift(1), horseshoe).point
    assert beta_map(sft, SymbolicPoint.periodic((1,)), horseshoe).point == HORSESHOE_FIXED[1]
    assert beta_map(sft, SymbolicPoint.periodic((0,)), horseshoe).eta == 0.0

    shift = build_system("full_shift")
    full = Sft.from_matrix([[1, 1], [1, 1]])
    assert beta_map(full, point, shift).point == point


def test_beta_rejects_inadmissible_points() -> None:
    horseshoe = build_system("horseshoe")
    sft = sft_from_points(horseshoe, HORSESHOE_FIXED, 0.5)
    with pytest.raises(InadmissibleError):
        beta_map(sft, SymbolicPoint.periodic((0, 1)), horseshoe)


def test_cat_pseudo_orbit_is_shadowed_within_the_bound() -> None:
    cat = build_system("cat")
    matrix = np.array([[2.0, 1.0], [1.0, 1.0]])
    rng = np.random.default_rng(7)
    current = rng.random(2)
    pseudo = [current]
    for _ in range(59):
        current = np.mod(matrix @ current + rng.uniform(-1e-3, 1e-3, size=2) / np.sqrt(2.0), 1.0)
        pseudo.append(current)
    result = shadow_pseudo_orbit(cat, pseudo)
    assert result.residual < 1e-12
    assert result.constant == pytest.approx(np.sqrt(5.0), rel=1e-9)
    assert result.distance <= result.bound + 1e-15
    assert result.bound < 3e-3


def test_horseshoe_pseudo_orbit_between_fixed_points() -> None:
    horseshoe = build_system("horseshoe")
    pseudo = [(0.0, 0.0), (0.0, 0.0), (1.0, 1.0), (1.0, 1.0), (0.0, 0.0)]
    result = shadow_pseudo_orbit(horseshoe, pseudo)
    assert result.residual < 1e-12
    assert result.constant == pytest.approx(1.5)
    assert result.distance <= result.bound + 1e-15


def test_horseshoe_shadowing_errors() -> None:
    horseshoe = build_system("horseshoe")
    with pytest.raises(BranchAmbiguityError):
        shadow_pseudo_orbit(horseshoe, [(0.0, 0.2 + 1e-12), (0.0, 1.0)])
    with pytest.raises(OrbitEscapeError):
        shadow_pseudo_orbit(horseshoe, [(0.0, 0.5), (0.0, 1.0)])


def test_horseshoe_itinerary_of_period_two_point() -> None:
    point = (Fraction(5, 6), Fraction(1, 6))
    assert horseshoe_itinerary(point, 4, 2) == (0, 1, 0, 1, 0, 1)


def test_homoclinic_grid_of_the_origin() -> None:
    grid = homoclinic_points(build_system("horseshoe"), 0, 1)
    assert grid.count == 7
    assert grid.min_distance == Fraction(4, 25)
    assert grid.transverse
    for (x, y), _ in grid.points():
        symbols = horseshoe_itinerary((x, y), 5, 4)
        assert symbols[:3] == (0, 0, 0)
        assert symbols[-3:] == (0, 0, 0)
        assert any(symbols)


@pytest.mark.parametrize(
    ("derivative", "transverse"),
    [
        ([[0.2, 1.0], [0.0, 5.0]], True),
        ([[0.2, 0.0], [0.0, 1.0]], False),
        ([[0.2, 1.0], [0.0, 0.2]], False),
    ],
)
def test_homoclinic_transversality_follows_the_derivative(
    derivative: list[list[float]], transverse: bool
) -> None:
    sheared = replace(
        build_system("horseshoe"), derivative_eval=lambda point: np.array(derivative)
    )
    assert homoclinic_points(sheared, 1, 1).transverse is transverse


@pytest.mark.parametrize("matrix", [[[1, 1], [1, 1]], GOLDEN], ids=["full", "golden"])
def test_density_witnesses_for_every_short_word(matrix: list[list[int]]) -> None:
    sft = Sft.from_matrix(matrix)
    checked = 0
    for length in range(1, 9):
        for word in words(2, length):
            if not sft.admissible_word(word):
                continue
            witness = periodic_density_witness(sft, word)
            center = (length - 1) // 2
            assert witness.window(-center, length - center) == word
            assert witness.is_periodic
            assert sft.admissible(witness)
            checked += 1
    if matrix == GOLDEN:
        assert 0 < checked < 510
    else:
        assert checked == 510
