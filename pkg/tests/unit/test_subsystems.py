import numpy as np
import pytest

from app.services.shift_space import SymbolicPoint
from app.services.subsystems import (
    MarkovEnclosure,
    NegativeCertificate,
    enclosing_markov_system,
    full_shift_spec,
    gap_orbit_spec,
    golden_mean_spec,
    local_product_check,
    maximality_survey,
    nu_index,
    subsystem_spec,
)
from app.services.systems import ParameterRangeError


def test_gap_generators_and_marked_points() -> None:
    spec = gap_orbit_spec()
    assert spec.generator_words(4) == ((0,), (0, 1), (0, 0, 1), (0, 0, 0, 1))
    assert len(spec.marked_points(3)) == 6


def test_membership_tests() -> None:
    golden = golden_mean_spec()
    assert golden.contains(SymbolicPoint.periodic((0, 1)))
    assert not golden.contains(SymbolicPoint.periodic((1,)))

    gap = gap_orbit_spec()
    assert gap.contains(SymbolicPoint.parse("0|1|0@0"))
    assert gap.contains(SymbolicPoint.periodic((0, 0, 1)))
    assert not gap.contains(SymbolicPoint.parse("0|101|0@0"))
    assert not gap.contains(SymbolicPoint.periodic((0, 1, 1)))


def test_local_product_structure() -> None:
    assert local_product_check(full_shift_spec(), 4).holds
    assert local_product_check(golden_mean_spec(), 4).holds
    broken = local_product_check(gap_orbit_spec(), 4)
    assert not broken.holds
    assert broken.witness is not None
    assert "witness" in broken.to_dict()


def test_nu_index() -> None:
    assert nu_index(2.0**-4) == 5
    assert nu_index(0.3) == 2
    with pytest.raises(ParameterRangeError):
        nu_index(1.5)


def test_gap_family_has_escaping_periodic_points() -> None:
    spec = gap_orbit_spec()
    outcome = enclosing_markov_system(spec, 2.0**-4, escapees=5)
    assert isinstance(outcome, MarkovEnclosure)
    distances = [escapee.distance for escapee in outcome.escapees]
    assert len(distances) == 5
    assert all(later < earlier for earlier, later in zip(distances, distances[1:]))
    assert all(escapee.distance < escapee.bound for escapee in outcome.escapees)
    assert not any(spec.contains(escapee.point) for escapee in outcome.escapees)
    assert outcome.to_dict()["kind"] == "enclosure"


@pytest.mark.parametrize("family", ["full", "golden"])
def test_locally_maximal_families_give_negative_certificates(family: str) -> None:
    outcome = enclosing_markov_system(subsystem_spec(family), 2.0**-4)
    assert isinstance(outcome, NegativeCertificate)
    assert outcome.pairs_checked > 0


def test_maximality_survey_over_powers() -> None:
    survey = maximality_survey("full", powers=(1, 2), depth=4)
    assert [entry.power for entry in survey] == [1, 2]
    assert all(entry.locally_maximal for entry in survey)
    assert survey[1].to_dict()["outcome"]["kind"] == "negative"


def test_unknown_family() -> None:
    with pytest.raises(ParameterRangeError):
        subsystem_spec("sturmian")
    assert subsystem_spec("gap", 2).name == "gap^2"


def test_power_enclosure_uses_shift_power_transitions() -> None:
    single = enclosing_markov_system(subsystem_spec("gap"), 2.0**-4, escapees=3)
    double = enclosing_markov_system(subsystem_spec("gap", 2), 2.0**-4, escapees=3)
    assert isinstance(single, MarkovEnclosure)
    assert isinstance(double, MarkovEnclosure)
    assert double.sft.power == 2
    assert double.sft.system_id == "full_shift^2"
    assert not np.array_equal(single.sft.matrix, double.sft.matrix)

    spec = gap_orbit_spec()
    for escapee in double.escapees:
        steps = len(escapee.cycle)
        assert escapee.point.shift(2 * steps) == escapee.point
        assert escapee.to_dict()["period"] == 2 * steps
        assert escapee.distance < escapee.bound
        assert not spec.contains(escapee.point)
