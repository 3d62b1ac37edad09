from __future__ import annotations

import pytest

pytest.importorskip("pytest_benchmark", reason="pytest-benchmark plugin not available")

from app.services.boxdyn import ChainDecomposition, build_box_graph, chain_classes
from app.services.systems import build_system


@pytest.mark.benchmark(group="boxdyn")
def test_cat_box_graph_benchmark(benchmark) -> None:  # type: ignore[no-untyped-def]
    cat = build_system("cat")
    counter = {"runs": 0}

    def decompose() -> ChainDecomposition:
        counter["runs"] += 1
        return chain_classes(build_box_graph(cat, 128))

    decomposition = benchmark.pedantic(decompose, rounds=3, iterations=1)
    assert counter["runs"] == 3
    assert decomposition.class_count == 1
    assert benchmark.stats.stats.max < 5.0
