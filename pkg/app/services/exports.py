"""DOT and CSV writers for box graphs, chain classes, order graphs and metric tables."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import pandas as pd

from app.services.boxdyn import BoxGraph, ChainDecomposition
from app.services.spectral import OrderGraph
from app.utils.logging import get_logger, log_event

LOGGER = get_logger(__name__)


def write_table(
    rows: Iterable[Mapping[str, object]], columns: Sequence[str], path: Path
) -> Path:
    frame = pd.DataFrame(list(rows), columns=list(columns))
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_box_graph_csv(graph: BoxGraph, path: Path) -> Path:
    edges = graph.edges()
    frame = pd.DataFrame({"src": edges[:, 0], "dst": edges[:, 1]})
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_classes_csv(decomposition: ChainDecomposition, path: Path) -> Path:
    rows = [
        {"box": int(box), "class": index}
        for index, boxes in enumerate(decomposition.classes)
        for box in sorted(int(b) for b in boxes)
    ]
    return write_table(sorted(rows, key=lambda row: row["box"]), ("box", "class"), path)


def box_graph_dot(graph: BoxGraph) -> str:
    name = graph.system_id or "boxes"
    lines = [f'digraph "{name}_{graph.cover.resolution}" {{']
    lines.extend(f"  box_{source} -> box_{target};" for source, target in graph.edges())
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_box_graph_dot(graph: BoxGraph, path: Path, edge_limit: int) -> bool:
    """Write the DOT export unless the graph has more than edge_limit edges."""
    if graph.edge_count > edge_limit:
        log_event(
            LOGGER,
            "exports.dot_skipped",
            system=graph.system_id,
            edges=graph.edge_count,
            limit=edge_limit,
        )
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(box_graph_dot(graph), encoding="utf-8")
    return True


def order_graph_dot(order: OrderGraph) -> str:
    lines = ['digraph "order" {']
    for node in order.nodes:
        index = node.class_index
        lines.append(
            f'  {index} [label="{order.label(index)}:{index}", boxes={len(node.boxes)}, '
            f"period={node.period}];"
        )
    for (source, target), evidence in sorted(order.edges.items()):
        lines.append(f'  {source} -> {target} [evidence="{evidence.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_order_graph_dot(order: OrderGraph, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(order_graph_dot(order), encoding="utf-8")
    return path
