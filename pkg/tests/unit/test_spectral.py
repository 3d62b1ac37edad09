import networkx as nx
import pytest

from app.services.boxdyn import build_box_graph, chain_classes, decompose_digraph
from app.services.errors import PreconditionError
from app.services.spectral import (
    Evidence,
    OrderGraph,
    basin_coverage,
    classify_attractors,
    connecting_repeller,
    detect_cycles,
    hasse_diagram,
    identity_propagation,
    k_chains,
    ll_relation,
    shortcut_verdicts,
    spectral_decomposition,
)
from app.services.systems import build_system


def test_north_south_order(north_south_order: OrderGraph) -> None:
    assert north_south_order.node_count == 2
    assert set(north_south_order.edges) == {(0, 1)}
    assert north_south_order.edges[(0, 1)] is Evidence.CONFIRMED
    assert north_south_order.attractors == frozenset({1})
    assert north_south_order.repellers == frozenset({0})
    assert north_south_order.label(1) == "A"
    assert north_south_order.label(0) == "R"


def test_north_south_basin_is_everything_but_the_source(north_south_order: OrderGraph) -> None:
    decomposition = north_south_order.decomposition
    assert decomposition is not None
    source = set(decomposition.classes[0].tolist())
    basin = set(north_south_order.basins[1].tolist())
    assert basin == set(range(64)) - source
    assert basin_coverage(north_south_order) == pytest.approx(1.0 - len(source) / 64)


def test_fixed_point_classes_are_mixing(north_south_order: OrderGraph) -> None:
    decomposition = north_south_order.decomposition
    assert decomposition is not None
    basic_sets = spectral_decomposition(decomposition)
    assert [basic.period for basic in basic_sets] == [1, 1]
    assert all(basic.mixing for basic in basic_sets)


def test_grad4_classification(grad4_order: OrderGraph) -> None:
    saddles = set(range(grad4_order.node_count)) - grad4_order.attractors - grad4_order.repellers
    assert len(grad4_order.attractors) == 4
    assert len(grad4_order.repellers) == 4
    assert len(saddles) == 8
    assert detect_cycles(grad4_order) == []
    assert basin_coverage(grad4_order) > 0.98


def test_grad4_shortcuts_and_connections(grad4_order: OrderGraph) -> None:
    report = shortcut_verdicts(grad4_order)
    assert report.passed
    assert report.to_dict()["passed"] is True
    trace = identity_propagation(grad4_order, min(grad4_order.attractors))
    assert trace.unreached == ()
    assert sum(1 for kind, _ in trace.order if kind == "attractor") == 4


def test_cycles_are_rotated_to_their_smallest_node() -> None:
    order = OrderGraph.from_edges(4, [(2, 1), (1, 3), (3, 2), (0, 1)])
    assert detect_cycles(order) == [(1, 3, 2)]
    with pytest.raises(PreconditionError):
        hasse_diagram(order)


def test_missing_shortcut_is_reported() -> None:
    order = OrderGraph.from_edges(3, [(0, 1), (1, 2)], attractors=[2], repellers=[0])
    report = shortcut_verdicts(order)
    assert not report.passed
    assert report.chain_failures == ((0, 1, 2),)


def test_transitive_relation_passes_and_reduces() -> None:
    order = OrderGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], attractors=[2], repellers=[0])
    assert shortcut_verdicts(order).chain_passed == 1
    assert sorted(hasse_diagram(order).edges()) == [(0, 1), (1, 2)]
    assert k_chains(order, 2) == [(0, 1, 2)]


def test_connecting_repeller_needs_classification() -> None:
    order = OrderGraph.from_edges(3, [(0, 1), (0, 2)])
    with pytest.raises(PreconditionError):
        connecting_repeller(order, 1, 2)


@pytest.mark.parametrize(
    ("edges", "period", "cycle"),
    [
        ([(0, 1), (1, 2), (2, 3), (3, 0), (1, 0)], 2, (1, 0)),
        ([(0, 1), (1, 2), (2, 0)], 3, (1, 2, 0)),
    ],
)
def test_periodic_class_splits_into_cyclically_permuted_pieces(
    edges: list[tuple[int, int]], period: int, cycle: tuple[int, ...]
) -> None:
    decomposition = decompose_digraph(nx.DiGraph(edges))
    (basic,) = spectral_decomposition(decomposition)
    assert basic.period == period
    assert not basic.mixing
    assert len(basic.pieces) == period
    assert basic.sigma_cycle == cycle
    adjacency = decomposition.adjacency
    for residue, piece in enumerate(basic.pieces):
        images = set(adjacency[piece].indices.tolist())
        assert images <= set(basic.pieces[(residue + 1) % period].tolist())


def test_trivial_flag_marks_small_periodic_clusters_only(north_south_order: OrderGraph) -> None:
    assert north_south_order.trivial == {0: True, 1: True}
    cat = build_system("cat")
    graph = build_box_graph(cat, 32)
    order = classify_attractors(ll_relation(chain_classes(graph), cat), graph)
    assert order.trivial == {0: False}
