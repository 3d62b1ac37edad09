"""Box covers, outer-approximating box graphs and chain recurrent classes.

Cells are half-open on the low side: along each axis box k is (k h, (k+1) h] and box 0 is the closed
cell [0, h], so a point on a grid line belongs to the lower box. On periodic axes the point 0 is in
box 0. A 2-D box id is `iy * resolution + ix`.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import product

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from app.services.dynamics_models import PhaseSpace, SpaceKind, as_point
from app.services.systems import CatalogSystem, DomainError, ParameterRangeError
from app.utils.constants import GRID_SNAP_TOLERANCE, RESOLUTION_MAX, RESOLUTION_MIN
from app.utils.logging import get_logger, log_event, log_timing

LOGGER = get_logger(__name__)


class EnclosureMode(str, Enum):
    CORNERS = "corners"
    LIPSCHITZ = "lipschitz"


def valid_resolution(resolution: int) -> bool:
    if not RESOLUTION_MIN <= resolution <= RESOLUTION_MAX:
        return False
    for base in (2, 5):
        value = resolution
        while value % base == 0:
            value //= base
        if value == 1:
            return True
    return False


def _snap(scaled: np.ndarray) -> np.ndarray:
    nearest = np.round(scaled)
    return np.where(np.abs(scaled - nearest) < GRID_SNAP_TOLERANCE, nearest, scaled)


@dataclass(frozen=True, slots=True)
class BoxCover:
    space: PhaseSpace
    resolution: int

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def size(self) -> int:
        return self.resolution**self.dim

    @property
    def side(self) -> float:
        return 1.0 / self.resolution

    @property
    def box_diameter(self) -> float:
        return self.side * float(np.sqrt(self.dim))

    def axis_indices(self, boxes: np.ndarray | Sequence[int]) -> np.ndarray:
        """(m, dim) integer axis coordinates of box ids."""
        ids = np.asarray(boxes, dtype=np.int64)
        if self.dim == 1:
            return ids.reshape(-1, 1)
        return np.column_stack([ids % self.resolution, ids // self.resolution])

    def box_ids(self, axes: np.ndarray) -> np.ndarray:
        axes = np.asarray(axes, dtype=np.int64)
        if self.dim == 1:
            return axes[:, 0]
        return axes[:, 1] * self.resolution + axes[:, 0]

    def index_points(self, points: np.ndarray) -> np.ndarray:
        """Box id of each row of `points`, ties going to the lower box."""
        values = np.atleast_2d(np.asarray(points, dtype=float))
        if self.space.periodic:
            values = np.mod(values, 1.0)
        scaled = _snap(values * self.resolution)
        axes = np.clip(np.ceil(scaled) - 1, 0, self.resolution - 1).astype(np.int64)
        return self.box_ids(axes)

    def box_of(self, point: object) -> int:
        coordinates = np.asarray(as_point(self.space, point), dtype=float)
        return int(self.index_points(coordinates.reshape(1, -1))[0])

    def bounds(self, boxes: np.ndarray | Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        axes = self.axis_indices(boxes)
        return axes * self.side, (axes + 1) * self.side

    def neighbourhood(self, boxes: Iterable[int], radius: int = 1) -> np.ndarray:
        """Boxes within Chebyshev distance `radius`, wrapping on periodic axes."""
        ids = np.unique(np.fromiter(boxes, dtype=np.int64))
        if ids.size == 0:
            return ids
        axes = self.axis_indices(ids)
        offsets = np.array(list(product(range(-radius, radius + 1), repeat=self.dim)))
        shifted = (axes[:, None, :] + offsets[None, :, :]).reshape(-1, self.dim)
        if self.space.periodic:
            shifted = np.mod(shifted, self.resolution)
        else:
            inside = np.all((shifted >= 0) & (shifted < self.resolution), axis=1)
            shifted = shifted[inside]
        return np.unique(self.box_ids(shifted))

    def ring(self, boxes: Iterable[int]) -> np.ndarray:
        """The one-box-ring inflation minus the boxes themselves."""
        ids = np.unique(np.fromiter(boxes, dtype=np.int64))
        return np.setdiff1d(self.neighbourhood(ids), ids)


@dataclass(frozen=True, eq=False)
class BoxGraph:
    cover: BoxCover
    epsilon: float
    adjacency: sparse.csr_matrix
    domain_mask: np.ndarray
    enclosure: EnclosureMode = EnclosureMode.CORNERS
    system_id: str = ""

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz)

    @cached_property
    def reverse(self) -> sparse.csr_matrix:
        return self.adjacency.transpose().tocsr()

    def successors(self, box: int) -> np.ndarray:
        start, stop = self.adjacency.indptr[box], self.adjacency.indptr[box + 1]
        return self.adjacency.indices[start:stop]

    def predecessors(self, box: int) -> np.ndarray:
        start, stop = self.reverse.indptr[box], self.reverse.indptr[box + 1]
        return self.reverse.indices[start:stop]

    def has_edge(self, source: int, target: int) -> bool:
        return bool(np.any(self.successors(source) == target))

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def edges(self) -> np.ndarray:
        """(nnz, 2) array of (src, dst) pairs in row-major order."""
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ChainDecomposition:
    """Recurrent components of a directed graph.

    `class_of[b]` is the class index of box (or node) b, or -1 for transient boxes. `graph` is the
    originating BoxGraph; it is None for decompositions of abstract digraphs.
    """

    adjacency: sparse.csr_matrix
    classes: tuple[np.ndarray, ...]
    class_of: np.ndarray
    graph: BoxGraph | None = None

    @property
    def transient(self) -> np.ndarray:
        return np.flatnonzero(self.class_of < 0)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def class_boxes(self, index: int) -> np.ndarray:
        return self.classes[index]

    def recurrent_mask(self) -> np.ndarray:
        return self.class_of >= 0


@dataclass(frozen=True, slots=True)
class IsolationResult:
    class_index: int
    isolated: bool
    neighbourhood: np.ndarray
    intruders: tuple[int, ...] = ()


# ---- enclosures ----
@dataclass(frozen=True, slots=True)
class _CellBatch:
    boxes: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lower_open: np.ndarray


def _cell_batches(system: CatalogSystem, cover: BoxCover) -> tuple[list[_CellBatch], np.ndarray]:
    """Source cells (clipped to the domain strips of partial maps) and the domain mask."""
    ids = np.arange(cover.size, dtype=np.int64)
    lower, upper = cover.bounds(ids)
    axes = cover.axis_indices(ids)
    lower_open = axes > 0
    kernel = system.kernel
    if kernel is None or not kernel.strips:
        return [_CellBatch(ids, lower, upper, lower_open)], np.ones(cover.size, dtype=bool)

    batches: list[_CellBatch] = []
    mask = np.zeros(cover.size, dtype=bool)
    rows = axes[:, -1]
    resolution = cover.resolution
    for start, stop in kernel.strips:
        scaled_start = _snap(np.array(start * resolution))
        scaled_stop = _snap(np.array(stop * resolution))
        meets = (rows < scaled_stop) & (rows + 1 >= scaled_start)
        if not meets.any():
            continue
        mask |= meets
        cell_lower = lower[meets].copy()
        cell_upper = upper[meets].copy()
        cell_open = lower_open[meets].copy()
        clipped_low = cell_lower[:, -1] < start
        cell_lower[clipped_low, -1] = start
        cell_open[clipped_low, -1] = False
        cell_upper[:, -1] = np.minimum(cell_upper[:, -1], stop)
        batches.append(_CellBatch(ids[meets], cell_lower, cell_upper, cell_open))
    return batches, mask


def _corner_images(system: CatalogSystem, batch: _CellBatch) -> tuple[np.ndarray, np.ndarray]:
    assert system.kernel is not None
    dim = batch.lower.shape[1]
    images = []
    for choice in product((0, 1), repeat=dim):
        corner = np.where(np.array(choice, dtype=bool), batch.upper, batch.lower)
        images.append(system.kernel.lift(corner))
    stacked = np.stack(images)
    return stacked.min(axis=0), stacked.max(axis=0)


def _axis_span(
    low: np.ndarray, high: np.ndarray, lower_open: np.ndarray, resolution: int, periodic: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive box-index range [first, last] (unwrapped) covering a lifted interval."""
    scaled_low = _snap(low * resolution)
    scaled_high = _snap(high * resolution)
    first = np.where(lower_open, np.floor(scaled_low), np.ceil(scaled_low) - 1)
    last = np.ceil(scaled_high) - 1
    if periodic:
        first = np.where(~lower_open & (np.mod(scaled_low, resolution) == 0), scaled_low, first)
        last = np.where(np.mod(scaled_high, resolution) == 0, scaled_high, last)
        wide = last - first + 1 >= resolution
        first = np.where(wide, 0, first)
        last = np.where(wide, resolution - 1, last)
    else:
        first = np.maximum(first, 0)
        last = np.where(scaled_high >= 0, np.clip(last, 0, resolution - 1), -1)
    return first.astype(np.int64), last.astype(np.int64)


def _expand(first: np.ndarray, last: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row index and value for every integer in each inclusive range."""
    counts = np.maximum(last - first + 1, 0)
    rows = np.repeat(np.arange(len(first)), counts)
    offsets = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
    return rows, np.repeat(first, counts) + offsets


def build_box_graph(
    system: CatalogSystem,
    resolution: int,
    epsilon: float = 0.0,
    *,
    enclosure: EnclosureMode | str = EnclosureMode.CORNERS,
) -> BoxGraph:
    """Directed box graph whose edges outer-approximate one step of the map plus an epsilon jump."""
    mode = EnclosureMode(enclosure)
    if system.kernel is None or system.space.kind is SpaceKind.SHIFTSPACE:
        raise DomainError(f"System {system.id} has no box-graph kernel")
    if not valid_resolution(resolution):
        raise ParameterRangeError(
            f"Resolution {resolution} must be a power of 2 or 5 "
            f"in [{RESOLUTION_MIN}, {RESOLUTION_MAX}]"
        )
    if epsilon < 0:
        raise ParameterRangeError("epsilon must be non-negative")

    cover = BoxCover(system.space, resolution)
    margin = epsilon
    if mode is EnclosureMode.LIPSCHITZ:
        margin += system.lipschitz * cover.box_diameter / 2.0

    with log_timing(
        LOGGER,
        "boxdyn.build",
        system=system.id,
        resolution=resolution,
        epsilon=epsilon,
        mode=mode.value,
    ):
        batches, mask = _cell_batches(system, cover)
        sources: list[np.ndarray] = []
        targets: list[np.ndarray] = []
        for batch in batches:
            low, high = _corner_images(system, batch)
            low, high = low - margin, high + margin
            open_ends = batch.lower_open & (margin == 0.0) & system.kernel.exact_corners
            spans = [
                _axis_span(
                    low[:, axis],
                    high[:, axis],
                    open_ends[:, axis],
                    resolution,
                    cover.space.periodic,
                )
                for axis in range(cover.dim)
            ]
            rows, ix = _expand(*spans[0])
            if cover.dim == 2:
                first_y, last_y = spans[1]
                inner, iy = _expand(first_y[rows], last_y[rows])
                rows, ix = rows[inner], ix[inner]
                axes = np.column_stack([ix, iy])
            else:
                axes = ix.reshape(-1, 1)
            if cover.space.periodic:
                axes = np.mod(axes, resolution)
            sources.append(batch.boxes[rows])
            targets.append(cover.box_ids(axes))

        source = np.concatenate(sources) if sources else np.empty(0, dtype=np.int64)
        target = np.concatenate(targets) if targets else np.empty(0, dtype=np.int64)
        adjacency = sparse.csr_matrix(
            (np.ones(len(source), dtype=np.int8), (source, target)), shape=(cover.size, cover.size)
        )
        adjacency.sum_duplicates()
        adjacency.data[:] = 1
        adjacency.sort_indices()

    graph = BoxGraph(cover, float(epsilon), adjacency, mask, mode, system.id)
    log_event(LOGGER, "boxdyn.graph", system=system.id, boxes=cover.size, edges=graph.edge_count)
    return graph


# ---- chain recurrence ----
def _recurrent_components(adjacency: sparse.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Strong-component labels and a mask of boxes lying on some cycle."""
    _, labels = csgraph.connected_components(adjacency, directed=True, connection="strong")
    sizes = np.bincount(labels)
    recurrent = (sizes[labels] > 1) | (adjacency.diagonal() > 0)
    return labels, recurrent


def _number_classes(
    groups: dict[int, list[int]], size: int
) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    members = sorted(
        (np.array(sorted(boxes), dtype=np.int64) for boxes in groups.values()),
        key=lambda boxes: int(boxes[0]),
    )
    class_of = np.full(size, -1, dtype=np.int64)
    for index, boxes in enumerate(members):
        class_of[boxes] = index
    return tuple(members), class_of


def chain_classes(graph: BoxGraph) -> ChainDecomposition:
    """Recurrent boxes grouped into classes, numbered by their smallest box.

    Components whose cells touch are merged: a jump into an adjacent box is an admissible chain step
    at the box scale.
    """
    cover = graph.cover
    with log_timing(
        LOGGER, "boxdyn.chain_classes", system=graph.system_id, resolution=cover.resolution
    ):
        labels, recurrent = _recurrent_components(graph.adjacency)
        boxes = np.flatnonzero(recurrent)
        if boxes.size == 0:
            empty = np.full(cover.size, -1, dtype=np.int64)
            return ChainDecomposition(graph.adjacency, (), empty, graph)

        axes = cover.axis_indices(boxes)
        offsets = np.array(list(product((-1, 0, 1), repeat=cover.dim)))
        shifted = (axes[:, None, :] + offsets[None, :, :]).reshape(-1, cover.dim)
        origin = np.repeat(boxes, len(offsets))
        if cover.space.periodic:
            shifted = np.mod(shifted, cover.resolution)
            inside = np.ones(len(shifted), dtype=bool)
        else:
            inside = np.all((shifted >= 0) & (shifted < cover.resolution), axis=1)
        neighbours = np.full(len(shifted), -1, dtype=np.int64)
        neighbours[inside] = cover.box_ids(shifted[inside])
        touching = inside & (neighbours >= 0)
        touching[touching] = recurrent[neighbours[touching]]

        # Union of touching strong components, solved as an undirected component problem.
        component_ids, compact = np.unique(labels[boxes], return_inverse=True)
        position = np.full(labels.max() + 1, -1, dtype=np.int64)
        position[component_ids] = np.arange(len(component_ids))
        left = position[labels[origin[touching]]]
        right = position[labels[neighbours[touching]]]
        links = sparse.csr_matrix(
            (np.ones(len(left), dtype=np.int8), (left, right)),
            shape=(len(component_ids), len(component_ids)),
        )
        _, merged = csgraph.connected_components(links, directed=False)

        groups: dict[int, list[int]] = {}
        for box, component in zip(boxes.tolist(), merged[compact].tolist()):
            groups.setdefault(component, []).append(box)
        classes, class_of = _number_classes(groups, cover.size)

    log_event(
        LOGGER,
        "boxdyn.classes",
        system=graph.system_id,
        classes=len(classes),
        recurrent=int(boxes.size),
    )
    return ChainDecomposition(graph.adjacency, classes, class_of, graph)


def decompose_digraph(graph: sparse.spmatrix | nx.DiGraph) -> ChainDecomposition:
    """Recurrent components of an abstract digraph (nodes 0..n-1), without any cell merging."""
    if isinstance(graph, nx.DiGraph):
        nodes = sorted(graph.nodes)
        adjacency = nx.to_scipy_sparse_array(graph, nodelist=nodes, dtype=np.int8, format="csr")
        adjacency = sparse.csr_matrix(adjacency)
    else:
        adjacency = sparse.csr_matrix(graph, dtype=np.int8, copy=True)
    adjacency.eliminate_zeros()
    adjacency.data[:] = 1
    labels, recurrent = _recurrent_components(adjacency)
    groups: dict[int, list[int]] = {}
    for node in np.flatnonzero(recurrent).tolist():
        groups.setdefault(int(labels[node]), []).append(node)
    classes, class_of = _number_classes(groups, adjacency.shape[0])
    return ChainDecomposition(adjacency, classes, class_of, None)


def reachable_boxes(
    adjacency: sparse.csr_matrix, sources: Iterable[int], *, blocked: np.ndarray | None = None
) -> np.ndarray:
    """Boolean mask of nodes reachable (in zero or more steps) from `sources`.

    Nodes flagged in `blocked` are entered but not expanded.
    """
    size = adjacency.shape[0]
    seen = np.zeros(size, dtype=bool)
    frontier = np.unique(np.fromiter(sources, dtype=np.int64))
    seen[frontier] = True
    indptr, indices = adjacency.indptr, adjacency.indices
    while frontier.size:
        if blocked is not None:
            frontier = frontier[~blocked[frontier]]
        if frontier.size == 0:
            break
        starts, stops = indptr[frontier], indptr[frontier + 1]
        _, positions = _expand(starts, stops - 1)
        following = np.unique(indices[positions])
        following = following[~seen[following]]
        seen[following] = True
        frontier = following
    return seen


def epsilon_chain_exists(graph: BoxGraph, x: object, y: object) -> bool:
    """Whether box(y) is reachable from box(x); x == y is the empty chain."""
    cover = graph.cover
    source, target = cover.box_of(x), cover.box_of(y)
    for point, box in ((x, source), (y, target)):
        if not graph.domain_mask[box]:
            raise DomainError(f"Point {point!r} lies outside the map domain")
    if as_point(cover.space, x) == as_point(cover.space, y) or source == target:
        return True
    return bool(reachable_boxes(graph.adjacency, [source])[target])


def isolation_check(decomposition: ChainDecomposition, class_index: int) -> IsolationResult:
    if decomposition.graph is None:
        raise DomainError("Isolation needs a box cover")
    if not 0 <= class_index < decomposition.class_count:
        raise IndexError(f"No class {class_index}")
    cover = decomposition.graph.cover
    neighbourhood = cover.neighbourhood(decomposition.classes[class_index].tolist())
    owners = decomposition.class_of[neighbourhood]
    intruders = sorted({int(owner) for owner in owners if owner >= 0 and owner != class_index})
    return IsolationResult(class_index, not intruders, neighbourhood, tuple(intruders))


def box_of(graph: BoxGraph, x: object) -> int:
    return graph.cover.box_of(x)


def coarsen(cover: BoxCover, boxes: Iterable[int], factor: int = 2) -> np.ndarray:
    """Ids at resolution `cover.resolution // factor` of the cells containing `boxes`."""
    if cover.resolution % factor:
        raise ParameterRangeError(f"Resolution {cover.resolution} is not divisible by {factor}")
    coarse = BoxCover(cover.space, cover.resolution // factor)
    axes = cover.axis_indices(np.fromiter(boxes, dtype=np.int64)) // factor
    return np.unique(coarse.box_ids(axes))
