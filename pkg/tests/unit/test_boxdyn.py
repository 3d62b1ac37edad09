import networkx as nx
import numpy as np
import pytest

from app.services.boxdyn import (
    BoxCover,
    BoxGraph,
    ChainDecomposition,
    EnclosureMode,
    box_of,
    build_box_graph,
    chain_classes,
    coarsen,
    decompose_digraph,
    epsilon_chain_exists,
    isolation_check,
    reachable_boxes,
    valid_resolution,
)
from app.services.dynamics_models import CIRCLE
from app.services.systems import (
    CatalogSystem,
    DomainError,
    ParameterRangeError,
    build_system,
    find_periodic_points,
)


def test_valid_resolutions_are_powers_of_two_or_five() -> None:
    assert valid_resolution(64)
    assert valid_resolution(125)
    assert valid_resolution(1024)
    assert not valid_resolution(100)
    assert not valid_resolution(8)
    assert not valid_resolution(2048)


def test_build_box_graph_rejects_bad_input() -> None:
    system = build_system("north_south")
    with pytest.raises(ParameterRangeError):
        build_box_graph(system, 48)
    with pytest.raises(ParameterRangeError):
        build_box_graph(system, 64, -0.1)
    with pytest.raises(DomainError):
        build_box_graph(build_system("full_shift"), 64)


def test_north_south_has_source_and_sink_classes(
    north_south_graph: BoxGraph, north_south_classes: ChainDecomposition
) -> None:
    assert north_south_classes.class_count == 2
    source, sink = north_south_classes.classes
    assert 0 in source
    assert box_of(north_south_graph, 0.5) == 31
    assert 31 in sink
    assert all(len(boxes) <= 4 for boxes in north_south_classes.classes)
    assert north_south_classes.recurrent_mask().sum() == len(source) + len(sink)


def test_every_box_has_a_successor(north_south_graph: BoxGraph) -> None:
    assert np.all(north_south_graph.out_degrees() >= 1)
    assert north_south_graph.edge_count == len(north_south_graph.edges())


def test_lipschitz_enclosure_contains_corner_edges() -> None:
    system = build_system("north_south")
    corners = build_box_graph(system, 32)
    margin = build_box_graph(system, 32, enclosure=EnclosureMode.LIPSCHITZ)
    corner_edges = {tuple(edge) for edge in corners.edges()}
    margin_edges = {tuple(edge) for edge in margin.edges()}
    assert corner_edges <= margin_edges
    assert margin.edge_count > corners.edge_count


def test_cat_map_is_a_single_chain_class() -> None:
    graph = build_box_graph(build_system("cat"), 32)
    decomposition = chain_classes(graph)
    assert decomposition.class_count == 1
    assert len(decomposition.classes[0]) == graph.cover.size


def test_epsilon_chains_follow_the_flow(north_south_graph: BoxGraph) -> None:
    assert epsilon_chain_exists(north_south_graph, 0.1, 0.45)
    assert not epsilon_chain_exists(north_south_graph, 0.5, 0.1)
    assert epsilon_chain_exists(north_south_graph, 0.3, 0.3)


def test_isolation_of_fixed_point_classes(north_south_classes: ChainDecomposition) -> None:
    for index in range(north_south_classes.class_count):
        result = isolation_check(north_south_classes, index)
        assert result.isolated
        assert result.intruders == ()


def test_decompose_abstract_digraph() -> None:
    decomposition = decompose_digraph(nx.DiGraph([(0, 1), (1, 0), (1, 2), (3, 3)]))
    assert decomposition.class_count == 2
    assert decomposition.transient.tolist() == [2]
    assert decomposition.graph is None


def test_reachable_boxes_stop_at_blocked_nodes() -> None:
    adjacency = decompose_digraph(nx.DiGraph([(0, 1), (1, 2), (2, 3)])).adjacency
    blocked = np.array([False, False, True, False])
    reach = reachable_boxes(adjacency, [0], blocked=blocked)
    assert reach.tolist() == [True, True, True, False]


def test_coarsen_halves_the_resolution() -> None:
    cover = BoxCover(CIRCLE, 64)
    assert coarsen(cover, [0, 1, 2, 3]).tolist() == [0, 1]
    with pytest.raises(ParameterRangeError):
        coarsen(BoxCover(CIRCLE, 125), [0])


@pytest.mark.parametrize("resolution", [64, 128])
def test_cat_map_stays_a_single_class_when_refined(resolution: int) -> None:
    decomposition = chain_classes(build_box_graph(build_system("cat"), resolution))
    assert decomposition.class_count == 1
    assert decomposition.recurrent_mask().all()


def test_larger_epsilon_only_adds_edges() -> None:
    system = build_system("north_south")
    previous: set[tuple[int, int]] = set()
    for epsilon in (0.0, 0.02, 0.05):
        edges = {tuple(edge) for edge in build_box_graph(system, 64, epsilon).edges().tolist()}
        assert previous <= edges
        previous = edges


def test_refined_graph_coarsens_into_the_coarse_graph() -> None:
    system = build_system("cat")
    fine = build_box_graph(system, 64)
    coarse = build_box_graph(system, 32)
    parent = coarse.cover.box_ids(fine.cover.axis_indices(np.arange(fine.cover.size)) // 2)
    coarse_edges = {tuple(edge) for edge in coarse.edges().tolist()}
    projected = {(int(parent[a]), int(parent[b])) for a, b in fine.edges().tolist()}
    assert projected <= coarse_edges
    covered = coarsen(fine.cover, range(fine.cover.size))
    assert covered.tolist() == list(range(coarse.cover.size))


def test_fixed_points_sit_in_recurrent_class_boxes(
    north_south: CatalogSystem,
    north_south_graph: BoxGraph,
    north_south_classes: ChainDecomposition,
) -> None:
    points = find_periodic_points(north_south, 2)
    assert points
    recurrent = north_south_classes.recurrent_mask()
    hit = set()
    for periodic in points:
        box = box_of(north_south_graph, periodic.point)
        assert recurrent[box]
        hit.add(int(north_south_classes.class_of[box]))
    assert hit == {0, 1}
