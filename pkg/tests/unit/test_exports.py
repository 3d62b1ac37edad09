from pathlib import Path

import pandas as pd

from app.services.boxdyn import BoxGraph, ChainDecomposition
from app.services.exports import (
    box_graph_dot,
    order_graph_dot,
    write_box_graph_csv,
    write_box_graph_dot,
    write_classes_csv,
    write_table,
)
from app.services.spectral import OrderGraph


def test_box_graph_csv_lists_every_edge(tmp_path: Path, north_south_graph: BoxGraph) -> None:
    path = write_box_graph_csv(north_south_graph, tmp_path / "box_graph.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["src", "dst"]
    assert len(frame) == north_south_graph.edge_count
    assert "\r" not in path.read_text(encoding="utf-8")


def test_classes_csv(tmp_path: Path, north_south_classes: ChainDecomposition) -> None:
    frame = pd.read_csv(write_classes_csv(north_south_classes, tmp_path / "classes.csv"))
    assert sorted(frame["class"].unique().tolist()) == [0, 1]
    assert list(frame.columns) == ["box", "class"]
    assert frame["box"].is_monotonic_increasing
    assert frame.loc[frame["box"] == 31, "class"].item() == 1


def test_dot_export_respects_the_edge_limit(tmp_path: Path, north_south_graph: BoxGraph) -> None:
    target = tmp_path / "box_graph.dot"
    assert not write_box_graph_dot(north_south_graph, target, edge_limit=1)
    assert not target.exists()
    assert write_box_graph_dot(north_south_graph, target, edge_limit=10_000)
    text = target.read_text(encoding="utf-8")
    assert text == box_graph_dot(north_south_graph)
    assert text.startswith('digraph "north_south_64" {')
    first, second = north_south_graph.edges()[0]
    assert f"  box_{first} -> box_{second};" in text.splitlines()


def test_order_graph_dot_labels(north_south_order: OrderGraph) -> None:
    text = order_graph_dot(north_south_order)
    assert 'label="R:0"' in text
    assert 'label="A:1"' in text
    assert '0 -> 1 [evidence="confirmed"];' in text


def test_write_table_keeps_column_order(tmp_path: Path) -> None:
    path = write_table(
        [{"tol": 1e-6, "residual": 2e-7}], ("tol", "residual"), tmp_path / "nested" / "t.csv"
    )
    assert path.read_text(encoding="utf-8").splitlines()[0] == "tol,residual"
