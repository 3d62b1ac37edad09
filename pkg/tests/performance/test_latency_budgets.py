from __future__ import annotations

import math
import time

import numpy as np

from app.services.boxdyn import build_box_graph, chain_classes
from app.services.symbolic import shadow_pseudo_orbit
from app.services.systems import build_system


def _pseudo_orbit(matrix: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    current = rng.random(2)
    orbit = [current]
    for _ in range(99):
        kick = rng.uniform(-1e-3, 1e-3, size=2) / math.sqrt(2.0)
        current = np.mod(matrix @ current + kick, 1.0)
        orbit.append(current)
    return np.array(orbit)


def test_shadowing_latency() -> None:
    cat = build_system("cat")
    rng = np.random.default_rng(0)
    matrix = np.array(cat.matrix, dtype=float)
    orbits = [_pseudo_orbit(matrix, rng) for _ in range(100)]

    start = time.perf_counter()
    results = [shadow_pseudo_orbit(cat, orbit) for orbit in orbits]
    duration = time.perf_counter() - start
    assert duration < 1.0, f"Shadowing took too long: {duration}"
    assert max(result.residual for result in results) < 1e-12
    assert max(result.distance for result in results) <= 3e-3


def test_cat_chain_classes_latency() -> None:
    cat = build_system("cat")
    start = time.perf_counter()
    decomposition = chain_classes(build_box_graph(cat, 128))
    duration = time.perf_counter() - start
    assert duration < 5.0, f"Chain classes took too long: {duration}"
    assert decomposition.class_count == 1
    assert decomposition.recurrent_mask().all()
