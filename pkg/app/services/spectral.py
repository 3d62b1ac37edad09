from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from app.services.boxdyn import BoxCover, BoxGraph, ChainDecomposition, reachable_boxes
from app.services.errors import PreconditionError
from app.services.systems import CatalogSystem
from app.utils.constants import ORBIT_EXTRA_SAMPLES, ORBIT_STEPS_PER_RESOLUTION
from app.utils.logging import get_logger, log_event, log_timing, log_verdict_failures

LOGGER = get_logger(__name__)

LATTICE_FRACTIONS = (0.0, 1.0 / 3.0, 2.0 / 3.0)
TRIVIAL_PIECE_WIDTH = 4


class Evidence(str, Enum):
    CERTIFIED = "certified"
    CONFIRMED = "confirmed"


@dataclass(frozen=True, eq=False)
class BasicSetApprox:
    """Approximation of one basic set.

    `sigma_cycle[r]` is the piece that receives the one-step images of piece r.
    """

    class_index: int
    boxes: np.ndarray
    period: int
    pieces: tuple[np.ndarray, ...] = ()
    sigma_cycle: tuple[int, ...] = (0,)

    @property
    def mixing(self) -> bool:
        return self.period == 1


@dataclass(frozen=True, eq=False)
class OrderGraph:
    nodes: tuple[BasicSetApprox, ...]
    edges: Mapping[tuple[int, int], Evidence]
    attractors: frozenset[int] = frozenset()
    repellers: frozenset[int] = frozenset()
    basins: Mapping[int, np.ndarray] = field(default_factory=dict)
    trivial: Mapping[int, bool] = field(default_factory=dict)
    classified: bool = False
    decomposition: ChainDecomposition | None = None

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        *,
        evidence: Evidence = Evidence.CERTIFIED,
        attractors: Iterable[int] | None = None,
        repellers: Iterable[int] | None = None,
    ) -> OrderGraph:
        """Abstract order graph (one box per node) for hand-built relations."""
        nodes = tuple(
            BasicSetApprox(index, np.array([index], dtype=np.int64), 1)
            for index in range(node_count)
        )
        classified = attractors is not None or repellers is not None
        return cls(
            nodes=nodes,
            edges={(int(a), int(b)): evidence for a, b in edges},
            attractors=frozenset(attractors or ()),
            repellers=frozenset(repellers or ()),
            classified=classified,
        )

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def has_edge(self, source: int, target: int) -> bool:
        return (source, target) in self.edges

    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.node_count))
        for (source, target), evidence in sorted(self.edges.items()):
            graph.add_edge(source, target, evidence=evidence.value)
        return graph

    def label(self, index: int) -> str:
        if index in self.attractors:
            return "A"
        if index in self.repellers:
            return "R"
        return "S"


# ---- basic sets ----
def _component_period(
    adjacency: sparse.csr_matrix, members: np.ndarray
) -> tuple[int, np.ndarray]:
    """Period of a strongly connected subgraph and the BFS level of each member."""
    local = {int(node): position for position, node in enumerate(members)}
    levels = np.full(len(members), -1, dtype=np.int64)
    levels[0] = 0
    queue = deque([0])
    edges: list[tuple[int, int]] = []
    while queue:
        position = queue.popleft()
        node = int(members[position])
        for neighbour in adjacency.indices[adjacency.indptr[node] : adjacency.indptr[node + 1]]:
            target = local.get(int(neighbour))
            if target is None:
                continue
            edges.append((position, target))
            if levels[target] < 0:
                levels[target] = levels[position] + 1
                queue.append(target)
    period = 0
    for source, target in edges:
        period = math.gcd(period, abs(int(levels[source]) + 1 - int(levels[target])))
    return max(period, 1), levels


def _piece_images(
    adjacency: sparse.csr_matrix, pieces: Sequence[np.ndarray], class_index: int
) -> tuple[int, ...]:
    """For each piece, the piece that receives most of its one-step images."""
    owner = {int(box): position for position, piece in enumerate(pieces) for box in piece}
    cycle = []
    for position, piece in enumerate(pieces):
        following = adjacency[piece].indices if piece.size else np.empty(0, np.int64)
        hits = [owner[int(box)] for box in following if int(box) in owner]
        if not hits:
            cycle.append(position)
            continue
        counts = np.bincount(hits, minlength=len(pieces))
        image = int(np.argmax(counts))
        if counts[image] != len(hits):
            log_event(
                LOGGER,
                "spectral.piece_images_split",
                class_index=class_index,
                piece=position,
                targets=np.flatnonzero(counts).tolist(),
            )
        cycle.append(image)
    return tuple(cycle)


def spectral_decomposition(decomposition: ChainDecomposition) -> list[BasicSetApprox]:
    """One basic set per class with its cyclic period and the pieces permuted by one graph step."""
    adjacency = decomposition.adjacency
    basic_sets = []
    for index, boxes in enumerate(decomposition.classes):
        sub = adjacency[boxes][:, boxes]
        _, labels = csgraph.connected_components(sub, directed=True, connection="strong")
        period = 0
        constituents = []
        for label in np.unique(labels):
            members = boxes[labels == label]
            component_period, levels = _component_period(adjacency, members)
            if len(members) == 1 and not adjacency[members[0], members[0]]:
                continue
            period = math.gcd(period, component_period)
            constituents.append((members, levels))
        period = max(period, 1)
        pieces = []
        for residue in range(period):
            chosen = [members[levels % period == residue] for members, levels in constituents]
            pieces.append(np.sort(np.concatenate(chosen)) if chosen else np.empty(0, np.int64))
        basic_sets.append(
            BasicSetApprox(
                class_index=index,
                boxes=boxes,
                period=period,
                pieces=tuple(pieces),
                sigma_cycle=_piece_images(adjacency, pieces, index),
            )
        )
    return basic_sets


# ---- the order relation ----
def _exits(decomposition: ChainDecomposition, index: int) -> np.ndarray:
    """Successor boxes of a class that lie outside it."""
    rows = decomposition.adjacency[decomposition.classes[index]]
    following = np.unique(rows.indices)
    return following[decomposition.class_of[following] != index]


def _certified_edges(decomposition: ChainDecomposition) -> dict[tuple[int, int], Evidence]:
    adjacency = decomposition.adjacency
    blocked = decomposition.recurrent_mask()
    edges: dict[tuple[int, int], Evidence] = {}
    for index in range(decomposition.class_count):
        following = _exits(decomposition, index)
        if following.size == 0:
            continue
        reached = reachable_boxes(adjacency, following.tolist(), blocked=blocked)
        for target in np.unique(decomposition.class_of[reached]):
            if target >= 0 and target != index:
                edges[(index, int(target))] = Evidence.CERTIFIED
    return edges


def _ring_samples(graph: BoxGraph, boxes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cover = graph.cover
    ring = cover.ring(boxes.tolist())
    ring = ring[graph.domain_mask[ring]]
    if ring.size == 0:
        return np.empty((0, cover.dim))
    lower, _ = cover.bounds(ring)
    offsets = np.array(list(product(LATTICE_FRACTIONS, repeat=cover.dim))) * cover.side
    lattice = (lower[:, None, :] + offsets[None, :, :]).reshape(-1, cover.dim)
    picks = rng.integers(0, ring.size, size=ORBIT_EXTRA_SAMPLES)
    extra = lower[picks] + rng.random((ORBIT_EXTRA_SAMPLES, cover.dim)) * cover.side
    return np.vstack([lattice, extra])


def _in_domain(system: CatalogSystem, points: np.ndarray) -> np.ndarray:
    if system.kernel is None or not system.kernel.strips:
        return points
    heights = points[:, -1]
    inside = np.zeros(len(points), dtype=bool)
    for start, stop in system.kernel.strips:
        inside |= (heights >= start) & (heights <= stop)
    return points[inside]


def _confirm_edges(
    decomposition: ChainDecomposition,
    system: CatalogSystem,
    edges: dict[tuple[int, int], Evidence],
    seed: int,
) -> None:
    graph = decomposition.graph
    assert graph is not None
    cover = graph.cover
    rng = np.random.default_rng(seed)
    targets_by_source: dict[int, set[int]] = {}
    for source, target in edges:
        targets_by_source.setdefault(source, set()).add(target)

    inflated = np.zeros((decomposition.class_count, cover.size), dtype=bool)
    for index, boxes in enumerate(decomposition.classes):
        inflated[index, cover.neighbourhood(boxes.tolist())] = True

    steps = ORBIT_STEPS_PER_RESOLUTION * cover.resolution
    for source in sorted(targets_by_source):
        pending = set(targets_by_source[source])
        points = _ring_samples(graph, decomposition.classes[source], rng)
        for _ in range(steps):
            if not pending or points.size == 0:
                break
            points = _in_domain(system, points)
            if points.size == 0:
                break
            points = system.forward(points)
            hits = inflated[:, cover.index_points(points)].any(axis=1)
            for target in [target for target in pending if hits[target]]:
                edges[(source, target)] = Evidence.CONFIRMED
                pending.discard(target)


def ll_relation(
    decomposition: ChainDecomposition,
    system: CatalogSystem | None = None,
    *,
    seed: int = 0,
) -> OrderGraph:
    """The order relation between basic sets.

    An edge is certified when a box path through transient boxes only runs from a successor of the
    source class into the target class. With a system supplied, sample orbits started in the one-box
    ring of the source upgrade edges to confirmed when they enter the target's one-ring inflation.
    """
    nodes = tuple(spectral_decomposition(decomposition))
    with log_timing(LOGGER, "spectral.order", classes=len(nodes)):
        edges = _certified_edges(decomposition)
        if system is not None and system.kernel is not None and decomposition.graph is not None:
            _confirm_edges(decomposition, system, edges, seed)
    log_event(
        LOGGER,
        "spectral.order.edges",
        certified=sum(1 for tag in edges.values() if tag is Evidence.CERTIFIED),
        confirmed=sum(1 for tag in edges.values() if tag is Evidence.CONFIRMED),
    )
    return OrderGraph(nodes=nodes, edges=dict(sorted(edges.items())), decomposition=decomposition)


def detect_cycles(order: OrderGraph) -> list[tuple[int, ...]]:
    """Every directed cycle of distinct nodes, rotated to start at its smallest node."""
    cycles = []
    for cycle in nx.simple_cycles(order.digraph()):
        start = cycle.index(min(cycle))
        cycles.append(tuple(cycle[start:] + cycle[:start]))
    return sorted(cycles, key=lambda cycle: (len(cycle), cycle))


def k_chains(order: OrderGraph, k: int) -> list[tuple[int, ...]]:
    """Chains of exactly k relations through distinct nodes."""
    if k < 1:
        return []
    graph = order.digraph()
    chains: list[tuple[int, ...]] = []

    def extend(path: list[int]) -> None:
        if len(path) == k + 1:
            chains.append(tuple(path))
            return
        for successor in sorted(graph.successors(path[-1])):
            if successor not in path:
                extend(path + [successor])

    for node in sorted(graph.nodes):
        extend([node])
    return chains


def hasse_diagram(order: OrderGraph) -> nx.DiGraph:
    """Transitive reduction of the order graph."""
    graph = order.digraph()
    if not nx.is_directed_acyclic_graph(graph):
        raise PreconditionError("The order graph has cycles; no Hasse diagram exists")
    reduced = nx.transitive_reduction(graph)
    reduced.add_nodes_from(graph.nodes)
    for source, target in reduced.edges:
        reduced.edges[source, target].update(graph.edges[source, target])
    return reduced


# ---- attractors and basins ----
def _closed_under(matrix: sparse.csr_matrix, boxes: np.ndarray) -> bool:
    rows = matrix[boxes]
    return bool(np.isin(rows.indices, boxes).all())


def _axis_extent(values: np.ndarray, resolution: int, periodic: bool) -> int:
    """Number of consecutive boxes along one axis needed to cover `values`."""
    ordered = np.unique(values)
    if not periodic:
        return int(ordered[-1] - ordered[0] + 1)
    gaps = np.diff(np.append(ordered, ordered[0] + resolution))
    return int(resolution - gaps.max() + 1)


def _periodic_orbit_cluster(cover: BoxCover, node: BasicSetApprox) -> bool:
    """Every piece of the class fits in a cube TRIVIAL_PIECE_WIDTH boxes wide."""
    pieces = [piece for piece in node.pieces if piece.size] or [node.boxes]
    if len(pieces) != node.period:
        return False
    for piece in pieces:
        axes = cover.axis_indices(piece)
        for axis in range(cover.dim):
            extent = _axis_extent(axes[:, axis], cover.resolution, cover.space.periodic)
            if extent > TRIVIAL_PIECE_WIDTH:
                return False
    return True


def classify_attractors(order: OrderGraph, graph: BoxGraph) -> OrderGraph:
    """Attractor and repeller labels from one-ring enclosures, plus attractor basins.

    A node is an attractor when the successors of its one-ring inflation stay inside it; repellers
    use predecessors. A basin holds the boxes that reach the attractor, minus other classes' boxes.
    """
    decomposition = order.decomposition
    if decomposition is None:
        raise PreconditionError("Attractor classification needs a box decomposition")
    cover = graph.cover
    attractors, repellers = set(), set()
    trivial: dict[int, bool] = {}
    for node in order.nodes:
        inflated = cover.neighbourhood(node.boxes.tolist())
        if _closed_under(graph.adjacency, inflated):
            attractors.add(node.class_index)
        if _closed_under(graph.reverse, inflated):
            repellers.add(node.class_index)
        trivial[node.class_index] = _periodic_orbit_cluster(cover, node)

    basins: dict[int, np.ndarray] = {}
    recurrent = decomposition.recurrent_mask()
    for index in sorted(attractors):
        boxes = decomposition.classes[index]
        reach = reachable_boxes(graph.reverse, boxes.tolist())
        reach &= ~recurrent | (decomposition.class_of == index)
        basins[index] = np.flatnonzero(reach)

    log_event(
        LOGGER,
        "spectral.classified",
        attractors=sorted(attractors),
        repellers=sorted(repellers),
    )
    return replace(
        order,
        attractors=frozenset(attractors),
        repellers=frozenset(repellers),
        basins=basins,
        trivial=trivial,
        classified=True,
    )


def basin_coverage(order: OrderGraph, graph: BoxGraph | None = None) -> float:
    """Fraction of all boxes lying in some attractor basin."""
    if not order.classified:
        raise PreconditionError("Basin coverage needs classified attractors")
    if graph is None and order.decomposition is not None:
        graph = order.decomposition.graph
    if graph is None:
        raise PreconditionError("Basin coverage needs a box graph")
    covered = np.zeros(graph.cover.size, dtype=bool)
    for boxes in order.basins.values():
        covered[boxes] = True
    return float(covered.mean())


def _basin_closure(order: OrderGraph, attractor: int) -> np.ndarray:
    decomposition = order.decomposition
    assert decomposition is not None and decomposition.graph is not None
    return decomposition.graph.cover.neighbourhood(order.basins[attractor].tolist())


@dataclass(frozen=True, slots=True)
class ConnectingResult:
    attractors: tuple[int, int]
    repeller: int | None
    evidence: tuple[str, str] | None = None
    diagnostic: str = ""


def connecting_repeller(order: OrderGraph, first: int, second: int) -> ConnectingResult:
    """A repeller preceding both attractors whose basin closures meet."""
    if not order.classified:
        raise PreconditionError("Connecting repellers need classified attractors")
    if first == second:
        raise PreconditionError("The two attractors must differ")
    for node in (first, second):
        if node not in order.attractors:
            raise PreconditionError(f"Node {node} is not an attractor")
    if order.decomposition is None or order.decomposition.graph is None:
        raise PreconditionError("Basin closures need a box decomposition")

    shared = np.intersect1d(_basin_closure(order, first), _basin_closure(order, second))
    if shared.size == 0:
        return ConnectingResult(
            (first, second), None, None, "basin closures do not meet within one box ring"
        )
    for repeller in sorted(order.repellers):
        if order.has_edge(repeller, first) and order.has_edge(repeller, second):
            tags = (order.edges[(repeller, first)].value, order.edges[(repeller, second)].value)
            return ConnectingResult((first, second), repeller, tags)
    return ConnectingResult((first, second), None, None, "no repeller precedes both attractors")


@dataclass(frozen=True)
class ShortcutReport:
    chain_passed: int
    chain_failures: tuple[tuple[int, ...], ...]
    basin_passed: int
    basin_failures: tuple[tuple[int, int, int], ...]

    @property
    def passed(self) -> bool:
        return not self.chain_failures and not self.basin_failures

    def to_dict(self) -> dict[str, object]:
        return {
            "chain_shortcut": {
                "passed": self.chain_passed,
                "failed": len(self.chain_failures),
                "failures": [list(path) for path in self.chain_failures],
            },
            "basin_shortcut": {
                "passed": self.basin_passed,
                "failed": len(self.basin_failures),
                "failures": [list(triple) for triple in self.basin_failures],
            },
            "passed": self.passed,
        }


def _unstable_side(decomposition: ChainDecomposition, node: int) -> np.ndarray:
    """Boxes reached from the node's successors through transient boxes."""
    following = _exits(decomposition, node)
    if following.size == 0:
        return following
    reach = reachable_boxes(
        decomposition.adjacency, following.tolist(), blocked=decomposition.recurrent_mask()
    )
    reach &= decomposition.class_of != node
    return np.flatnonzero(reach)


def shortcut_verdicts(order: OrderGraph) -> ShortcutReport:
    """Check the two chain-shortcut properties on every instance the order graph offers.

    Chain instances: every repeller-rooted chain r << ... << x of two or more relations must have
    r << x. Basin instances: for an attractor a, a node n and a repeller r with r << n and the basin
    closure of a meeting the unstable side of n, r << a must hold.
    """
    if not order.classified:
        raise PreconditionError("Shortcut verdicts need classified attractors and repellers")
    graph = order.digraph()

    chain_passed = 0
    chain_failures: list[tuple[int, ...]] = []
    for root in sorted(order.repellers):
        stack = [[root]]
        while stack:
            path = stack.pop()
            if len(path) >= 3:
                if order.has_edge(root, path[-1]):
                    chain_passed += 1
                else:
                    chain_failures.append(tuple(path))
            for successor in sorted(graph.successors(path[-1]), reverse=True):
                if successor not in path:
                    stack.append(path + [successor])

    basin_passed = 0
    basin_failures: list[tuple[int, int, int]] = []
    decomposition = order.decomposition
    if decomposition is not None and decomposition.graph is not None and order.basins:
        closures = {index: _basin_closure(order, index) for index in sorted(order.attractors)}
        for middle in range(order.node_count):
            side = _unstable_side(decomposition, middle)
            for attractor, closure in closures.items():
                if attractor == middle or not np.intersect1d(closure, side).size:
                    continue
                for repeller in sorted(order.repellers):
                    if repeller in (middle, attractor) or not order.has_edge(repeller, middle):
                        continue
                    if order.has_edge(repeller, attractor):
                        basin_passed += 1
                    else:
                        basin_failures.append((attractor, middle, repeller))

    report = ShortcutReport(
        chain_passed, tuple(sorted(chain_failures)), basin_passed, tuple(sorted(basin_failures))
    )
    log_verdict_failures(
        LOGGER, analysis="shortcut", failures=list(report.chain_failures + report.basin_failures)
    )
    return report


@dataclass(frozen=True)
class PropagationTrace:
    order: tuple[tuple[str, int], ...]
    unreached: tuple[int, ...]


def identity_propagation(order: OrderGraph, seed: int) -> PropagationTrace:
    """Walk from one attractor to the others through connecting repellers.

    A map equal to the identity on the basin of `seed` is forced to be the identity on every
    attractor reached, so the unreached attractors are where the argument stalls.
    """
    if seed not in order.attractors:
        raise PreconditionError(f"Node {seed} is not an attractor")
    visited = [("attractor", seed)]
    reached = {seed}
    reached_repellers: set[int] = set()
    queue = deque([seed])
    while queue:
        current = queue.popleft()
        for other in sorted(order.attractors - reached):
            result = connecting_repeller(order, current, other)
            if result.repeller is None:
                continue
            if result.repeller not in reached_repellers:
                reached_repellers.add(result.repeller)
                visited.append(("repeller", result.repeller))
            reached.add(other)
            visited.append(("attractor", other))
            queue.append(other)
    return PropagationTrace(tuple(visited), tuple(sorted(order.attractors - reached)))


def order_summary(order: OrderGraph) -> dict[str, object]:
    return {
        "nodes": [
            {
                "index": node.class_index,
                "boxes": int(len(node.boxes)),
                "period": node.period,
                "mixing": node.mixing,
                "label": order.label(node.class_index),
                "trivial": order.trivial.get(node.class_index),
            }
            for node in order.nodes
        ],
        "edges": [
            {"source": source, "target": target, "evidence": evidence.value}
            for (source, target), evidence in sorted(order.edges.items())
        ],
    }
