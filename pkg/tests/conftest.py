from __future__ import annotations

from pathlib import Path

import pytest

from app.services.boxdyn import BoxGraph, ChainDecomposition, build_box_graph, chain_classes
from app.services.spectral import OrderGraph, classify_attractors, ll_relation
from app.services.systems import CatalogSystem, build_system


@pytest.fixture
def temp_data_root(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    data_root = tmp_path / "data"
    data_root.mkdir()
    monkeypatch.setenv("HYPERBOLIC_LAB_DATA_ROOT", str(data_root))
    monkeypatch.setenv("HYPERBOLIC_LAB_LOG_DIR", str(data_root / "logs"))
    monkeypatch.setenv("HYPERBOLIC_LAB_OUTPUT_ROOT", str(data_root / "runs"))
    return data_root


@pytest.fixture
def scenario_dir(tmp_path: Path) -> Path:
    directory = tmp_path / "scenarios"
    directory.mkdir()
    return directory


@pytest.fixture(scope="session")
def north_south() -> CatalogSystem:
    return build_system("north_south")


@pytest.fixture(scope="session")
def north_south_graph(north_south: CatalogSystem) -> BoxGraph:
    return build_box_graph(north_south, 64)


@pytest.fixture(scope="session")
def north_south_classes(north_south_graph: BoxGraph) -> ChainDecomposition:
    return chain_classes(north_south_graph)


@pytest.fixture(scope="session")
def north_south_order(
    north_south: CatalogSystem,
    north_south_graph: BoxGraph,
    north_south_classes: ChainDecomposition,
) -> OrderGraph:
    order = ll_relation(north_south_classes, north_south)
    return classify_attractors(order, north_south_graph)


@pytest.fixture(scope="session")
def grad4_order() -> OrderGraph:
    system = build_system("grad4")
    graph = build_box_graph(system, 128)
    return classify_attractors(ll_relation(chain_classes(graph), system), graph)