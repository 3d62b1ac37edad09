"""Scenario runner: executes the analysis pipeline and writes report, graphs and metrics."""

from __future__ import annotations

import json
import math
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from app.services.boxdyn import BoxGraph, ChainDecomposition, build_box_graph, chain_classes
from app.services.centralizer import (
    nonresonance_check,
    partner_thetas,
    periodic_permutation_check,
)
from app.services.errors import LabError, PreconditionError
from app.services.exports import (
    write_box_graph_csv,
    write_box_graph_dot,
    write_classes_csv,
    write_order_graph_dot,
    write_table,
)
from app.services.koenigs import (
    conjugacy_residual,
    conjugated_map,
    contraction_germ,
    linearity_test,
    working_grid,
)
from app.services.scenario import AnalysisSpec, Scenario, ScenarioParseError, load_scenario
from app.services.shift_space import SymbolicPoint, words
from app.services.spectral import (
    OrderGraph,
    basin_coverage,
    classify_attractors,
    connecting_repeller,
    detect_cycles,
    hasse_diagram,
    identity_propagation,
    ll_relation,
    order_summary,
    shortcut_verdicts,
)
from app.services.subsystems import (
    Escapee,
    MarkovEnclosure,
    enclosing_markov_system,
    maximality_survey,
    subsystem_spec,
)
from app.services.symbolic import (
    NoConnectingPathError,
    Sft,
    beta_map,
    check_irreducible_primitive,
    periodic_density_witness,
    prune,
    sft_from_points,
    sft_to_json,
    shadow_pseudo_orbit,
)
from app.services.systems import (
    CatalogSystem,
    DomainError,
    build_system,
    find_periodic_points,
    resolve_partner,
)
from app.utils.config import RuntimeConfig, load_runtime_config
from app.utils.constants import (
    EXIT_EXECUTION_ERROR,
    EXIT_OK,
    EXIT_VERDICT_FAILED,
    REPORT_SCHEMA,
)
from app.utils.logging import (
    BufferedJsonlWriter,
    get_logger,
    log_event,
    log_timing,
    log_verdict_failures,
)

LOGGER = get_logger(__name__)

REPORT_NAME = "report.json"
SHADOW_RESIDUAL_LIMIT = 1e-12
DENSITY_WORD_LENGTH = 8
DENSITY_WORD_LENGTH_LARGE = 4
KOENIGS_TOLERANCE = 1e-12
LINEARITY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class AnalysisOutcome:
    name: str
    status: str
    verdict: bool | None = None
    result: Mapping[str, object] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "name": self.name,
            "status": self.status,
            "verdict": self.verdict,
            "result": dict(self.result),
        }
        if self.error is not None:
            payload["error"] = self.error
        return payload


def _verdict(name: str, passed: bool, result: Mapping[str, object]) -> AnalysisOutcome:
    return AnalysisOutcome(name, "ok" if passed else "failed", passed, result)


@dataclass
class ScenarioRun:
    """State shared by the analyses of one scenario; later steps reuse earlier results."""

    scenario: Scenario
    system: CatalogSystem
    output_dir: Path
    config: RuntimeConfig
    files: list[str] = field(default_factory=list)
    _graph: BoxGraph | None = None
    _decomposition: ChainDecomposition | None = None
    _order: OrderGraph | None = None

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.output_dir / name

    def box_graph(self) -> BoxGraph:
        if self._graph is None:
            self._graph = build_box_graph(
                self.system,
                self.scenario.resolution,
                self.scenario.epsilon,
                enclosure=self.scenario.enclosure,
            )
        return self._graph

    def decomposition(self) -> ChainDecomposition:
        if self._decomposition is None:
            self._decomposition = chain_classes(self.box_graph())
        return self._decomposition

    def order(self) -> OrderGraph:
        if self._order is None:
            self._order = _classified_order(self.system, self.decomposition(), self.seed)
        return self._order


def _classified_order(
    system: CatalogSystem, decomposition: ChainDecomposition, seed: int
) -> OrderGraph:
    assert decomposition.graph is not None
    order = ll_relation(decomposition, system, seed=seed)
    return classify_attractors(order, decomposition.graph)


# ---- analyses ----
def _chainrec(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    graph = run.box_graph()
    decomposition = run.decomposition()
    classes = [
        {
            "index": index,
            "size": int(len(boxes)),
            "first_box": int(boxes.min()),
            "last_box": int(boxes.max()),
        }
        for index, boxes in enumerate(decomposition.classes)
    ]
    write_box_graph_csv(graph, run.path("box_graph.csv"))
    write_classes_csv(decomposition, run.path("classes.csv"))
    dot_path = run.output_dir / "box_graph.dot"
    if write_box_graph_dot(graph, dot_path, run.config.dot_edge_limit):
        run.path("box_graph.dot")
    covered = int(decomposition.recurrent_mask().sum())
    result = {
        "resolution": graph.cover.resolution,
        "enclosure": graph.enclosure.value,
        "boxes": graph.cover.size,
        "domain_boxes": int(graph.domain_mask.sum()),
        "edges": graph.edge_count,
        "class_count": decomposition.class_count,
        "classes": classes,
        "transient_boxes": int(len(decomposition.transient)),
        "single_class_covers_all": decomposition.class_count == 1 and covered == graph.cover.size,
    }
    return AnalysisOutcome(spec.name, "ok", None, result)


def _spectral(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    order = run.order()
    write_order_graph_dot(order, run.path("order_graph.dot"))
    saddles = set(range(order.node_count)) - order.attractors - order.repellers
    coverage = basin_coverage(order)
    sweep = [{"resolution": run.scenario.resolution, "coverage": coverage}]
    for resolution in sorted(set(spec.sweep) - {run.scenario.resolution}):
        graph = build_box_graph(
            run.system, resolution, run.scenario.epsilon, enclosure=run.scenario.enclosure
        )
        swept = _classified_order(run.system, chain_classes(graph), run.seed)
        sweep.append({"resolution": resolution, "coverage": basin_coverage(swept, graph)})
    sweep.sort(key=lambda row: row["resolution"])
    result = {
        **order_summary(order),
        "attractors": sorted(order.attractors),
        "repellers": sorted(order.repellers),
        "saddles": sorted(saddles),
        "basin_coverage": coverage,
        "sweep": sweep,
    }
    if not detect_cycles(order):
        result["hasse"] = sorted([list(edge) for edge in hasse_diagram(order).edges()])
    return AnalysisOutcome(spec.name, "ok", None, result)


def _verdicts(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    order = run.order()
    cycles = detect_cycles(order)
    log_verdict_failures(LOGGER, analysis="cycles", failures=cycles)
    shortcuts = shortcut_verdicts(order)

    connections = []
    missing = []
    attractors = sorted(order.attractors)
    for position, first in enumerate(attractors):
        for second in attractors[position + 1 :]:
            found = connecting_repeller(order, first, second)
            if found.repeller is None and found.diagnostic.startswith("basin closures"):
                continue
            connections.append(
                {
                    "attractors": [first, second],
                    "repeller": found.repeller,
                    "diagnostic": found.diagnostic,
                }
            )
            if found.repeller is None:
                missing.append((first, second))
    log_verdict_failures(LOGGER, analysis="connecting_repeller", failures=missing)

    result: dict[str, object] = {
        "cycles": [list(cycle) for cycle in cycles],
        "shortcuts": shortcuts.to_dict(),
        "connections": connections,
    }
    if attractors:
        trace = identity_propagation(order, attractors[0])
        result["propagation"] = {
            "order": [[kind, index] for kind, index in trace.order],
            "unreached": list(trace.unreached),
        }
    return _verdict(spec.name, not cycles and shortcuts.passed and not missing, result)


def _random_symbolic_points(sft: Sft, count: int, seed: int) -> list[SymbolicPoint]:
    rng = np.random.default_rng(seed)
    size = sft.size
    points: list[SymbolicPoint] = []
    for _ in range(count * 50):
        if len(points) >= count:
            break

        def draw(low: int, high: int) -> tuple[int, ...]:
            return tuple(int(v) for v in rng.integers(0, size, size=int(rng.integers(low, high))))

        core = draw(0, 7)
        candidate = SymbolicPoint(draw(1, 7), core, draw(1, 7), int(rng.integers(0, len(core) + 1)))
        if sft.admissible(candidate):
            points.append(candidate)
    return points


def _marked_points(run: ScenarioRun, spec: AnalysisSpec) -> tuple[list[object], float]:
    system = run.system
    if system.id == "horseshoe":
        return [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(1))], spec.epsilon or 1.5
    if system.id == "full_shift":
        return [SymbolicPoint.periodic((0,)), SymbolicPoint.periodic((1,))], spec.epsilon or 1.5
    points = [
        point.exact if point.exact is not None else point.point
        for point in find_periodic_points(system, spec.n)
    ]
    return points, spec.epsilon or 0.25


def _density_summary(sft: Sft) -> dict[str, object]:
    length = DENSITY_WORD_LENGTH if sft.size <= 2 else DENSITY_WORD_LENGTH_LARGE
    checked = verified = 0
    unclosed = 0
    for size in range(1, length + 1):
        for word in words(sft.size, size):
            if not sft.admissible_word(word):
                continue
            checked += 1
            try:
                witness = periodic_density_witness(sft, word)
            except NoConnectingPathError:
                unclosed += 1
                continue
            center = (len(word) - 1) // 2
            in_place = witness.window(-center, len(word) - center) == word
            if in_place and sft.admissible(witness):
                verified += 1
    return {"max_length": length, "words": checked, "verified": verified, "unclosed": unclosed}


def _sft(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    marked, epsilon = _marked_points(run, spec)
    sft = sft_from_points(run.system, marked, epsilon)  # type: ignore[arg-type]
    pruned, kept = prune(sft)
    transitive, mixing = check_irreducible_primitive(pruned)
    density = _density_summary(pruned) if pruned.size else {"words": 0, "verified": 0}
    result: dict[str, object] = {
        "sft": sft_to_json(sft),
        "kept_symbols": list(kept),
        "transitive": transitive,
        "mixing": mixing,
        "density": density,
    }
    passed = density["words"] == density["verified"]
    if run.system.id in ("horseshoe", "full_shift"):
        samples = _random_symbolic_points(sft, spec.samples, run.seed)
        mismatches = []
        for point in samples:
            image = beta_map(sft, point, run.system).point
            if run.system.map_eval(image) != beta_map(sft, point.shift(1), run.system).point:
                mismatches.append(str(point))
        log_verdict_failures(LOGGER, analysis="beta_conjugacy", failures=mismatches)
        result["beta"] = {"samples": len(samples), "mismatches": mismatches}
        passed = passed and not mismatches
    return _verdict(spec.name, passed, result)


def _noisy_orbit(
    system: CatalogSystem, rng: np.random.Generator, length: int, noise: float
) -> np.ndarray:
    matrix = np.array(system.matrix, dtype=float)
    current = rng.random(2)
    orbit = [current]
    for _ in range(length - 1):
        kick = rng.uniform(-noise, noise, size=2) / math.sqrt(2.0)
        current = np.mod(matrix @ current + kick, 1.0)
        orbit.append(current)
    return np.array(orbit)


def _shadow(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    system = run.system
    rng = np.random.default_rng(run.seed)
    rows = []
    for _ in range(spec.orbits):
        if system.matrix is not None:
            pseudo = _noisy_orbit(system, rng, spec.length, spec.noise)
        elif system.id == "horseshoe":
            symbols = rng.integers(0, 2, size=spec.length)
            pseudo = np.column_stack([symbols, symbols]).astype(float)
        else:
            raise DomainError(f"Shadowing is not available for {system.id}")
        shadow = shadow_pseudo_orbit(system, pseudo)
        rows.append(shadow)
    residual = max((row.residual for row in rows), default=0.0)
    within = all(row.distance <= row.bound + 1e-15 for row in rows)
    result = {
        "orbits": len(rows),
        "length": spec.length,
        "noise": spec.noise,
        "constant": rows[0].constant if rows else None,
        "max_residual": residual,
        "max_distance": max((row.distance for row in rows), default=0.0),
        "max_bound": max((row.bound for row in rows), default=0.0),
    }
    return _verdict(spec.name, residual < SHADOW_RESIDUAL_LIMIT and within, result)


def _escapees_valid(escapees: tuple[Escapee, ...], count: int) -> bool:
    distances = [escapee.distance for escapee in escapees]
    decreasing = all(b < a for a, b in zip(distances, distances[1:]))
    bounded = all(escapee.distance < escapee.bound for escapee in escapees)
    return len(escapees) >= count and decreasing and bounded


def _lemma53(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    nu = 2.0**-spec.nu_exponent
    outcome = enclosing_markov_system(subsystem_spec(spec.family), nu, escapees=spec.escapees)
    survey = maximality_survey(spec.family, powers=spec.powers, depth=spec.depth, nu=nu)
    consistent = all(entry.local_product.holds == entry.locally_maximal for entry in survey)
    if isinstance(outcome, MarkovEnclosure):
        consistent = consistent and _escapees_valid(outcome.escapees, spec.escapees)
    result = {
        "family": spec.family,
        "nu": nu,
        "enclosure": outcome.to_dict(),
        "survey": [entry.to_dict() for entry in survey],
    }
    return _verdict(spec.name, consistent, result)


def _centralizer(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    partner = resolve_partner(run.system, spec.partner)
    report = periodic_permutation_check(run.system, partner, spec.n, seed=run.seed)
    rows = []
    for point, theta in partner_thetas(partner, report):
        rows.append({"point": str(point.exact or point.point), **theta.row()})
    if rows:
        write_table(
            rows,
            ("point", "theta1", "theta2", "sign1", "sign2", "chi1", "chi2", "class", "in_z1"),
            run.path("theta.csv"),
        )
    result = {"partner": partner.id, **report.to_dict(), "thetas": rows}
    failures = [
        index
        for index, ok in enumerate(zip(report.similarity_ok, report.manifold_ok))
        if not all(ok)
    ]
    log_verdict_failures(LOGGER, analysis="centralizer", failures=failures)
    return _verdict(spec.name, report.passed, result)


def _default_sink(system: CatalogSystem, spec: AnalysisSpec) -> float:
    if spec.fixed_point is not None:
        return spec.fixed_point
    sink = system.notes.get("sink")
    if sink is None:
        raise PreconditionError(f"Koenigs analysis on {system.id} needs an explicit fixed_point")
    return float(Fraction(sink))


def _koenigs(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    germ = contraction_germ(run.system, _default_sink(run.system, spec))
    grid = working_grid(germ)
    residuals = [
        {"tol": tol, "residual": conjugacy_residual(germ, grid, tol)}
        for tol in sorted(spec.tolerances, reverse=True)
    ]
    conjugated = conjugated_map(germ, germ.step, KOENIGS_TOLERANCE)
    linear = linearity_test(conjugated, germ.multiplier, grid[::5], LINEARITY_TOLERANCE)
    passed = linear.linear and all(row["residual"] < 10 * row["tol"] for row in residuals)
    result = {
        "germ": germ.name,
        "multiplier": germ.multiplier,
        "radius": germ.radius,
        "residuals": residuals,
        "linearity": linear.to_dict(),
    }
    return _verdict(spec.name, passed, result)


def _resonance(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    if spec.eigenvalues is not None:
        spectra = [tuple(spec.eigenvalues)]
    else:
        spectra = []
        for point in find_periodic_points(run.system, spec.n):
            if point.eigen is None or not point.eigen.hyperbolic:
                continue
            rounded = tuple(round(value, 12) for value in point.eigen.eigenvalues)
            if rounded not in spectra:
                spectra.append(rounded)
    reports = [nonresonance_check(values, spec.j_max).to_dict() for values in spectra]
    return AnalysisOutcome(spec.name, "ok", None, {"spectra": reports})


ANALYSES: dict[str, Callable[[ScenarioRun, AnalysisSpec], AnalysisOutcome]] = {
    "chainrec": _chainrec,
    "spectral": _spectral,
    "verdicts": _verdicts,
    "sft": _sft,
    "shadow": _shadow,
    "lemma53": _lemma53,
    "centralizer": _centralizer,
    "koenigs": _koenigs,
    "resonance": _resonance,
}


# ---- runner ----
def _jsonable(value: object) -> object:
    if isinstance(value, Mapping):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else str(number)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Fraction):
        return str(value)
    return value


def resolve_output_dir(
    scenario: Scenario, scenario_path: Path, override: Path | None, config: RuntimeConfig
) -> Path:
    if override is not None:
        return override
    name = scenario.output_dir or scenario_path.stem
    target = Path(name)
    return target if target.is_absolute() else config.output_root / target


def exit_code_for(outcomes: list[AnalysisOutcome]) -> int:
    statuses = {outcome.status for outcome in outcomes}
    if "error" in statuses:
        return EXIT_EXECUTION_ERROR
    if statuses & {"failed", "precondition_failed"}:
        return EXIT_VERDICT_FAILED
    return EXIT_OK


def _run_analysis(run: ScenarioRun, spec: AnalysisSpec) -> AnalysisOutcome:
    try:
        with log_timing(LOGGER, "scenario.analysis", analysis=spec.name, system=run.system.id):
            return ANALYSES[spec.name](run, spec)
    except PreconditionError as exc:
        return AnalysisOutcome(spec.name, "precondition_failed", False, error=str(exc))
    except Exception as exc:  # noqa: BLE001 - recorded in the report, run continues
        LOGGER.exception("Analysis %s failed", spec.name)
        return AnalysisOutcome(spec.name, "error", None, error=f"{type(exc).__name__}: {exc}")


def write_report(run: ScenarioRun, outcomes: list[AnalysisOutcome], exit_code: int) -> Path:
    scenario = run.scenario
    payload = {
        "schema": REPORT_SCHEMA,
        "scenario": {
            "system": {"id": scenario.system.id, "params": dict(run.system.params)},
            "resolution": scenario.resolution,
            "epsilon": scenario.epsilon,
            "enclosure": scenario.enclosure.value,
            "seed": scenario.seed,
        },
        "analyses": [outcome.to_dict() for outcome in outcomes],
        "files": sorted(run.files),
        "exit_code": exit_code,
    }
    path = run.output_dir / REPORT_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def run_scenario(path: Path, *, output_dir: Path | None = None, seed: int | None = None) -> int:
    """Run every analysis of a scenario file and return the process exit code."""
    config = load_runtime_config()
    try:
        scenario = load_scenario(path)
        if seed is not None:
            scenario = scenario.model_copy(update={"seed": seed})
        system = build_system(scenario.system.id, scenario.system.params)
    except ScenarioParseError as exc:
        log_event(LOGGER, "scenario.parse_error", path=str(path), line=exc.line, column=exc.column)
        LOGGER.error("%s: %s", path, exc)
        return EXIT_EXECUTION_ERROR
    except LabError as exc:
        LOGGER.error("%s: %s", path, exc)
        return EXIT_EXECUTION_ERROR

    target = resolve_output_dir(scenario, path, output_dir, config)
    target.mkdir(parents=True, exist_ok=True)
    run = ScenarioRun(scenario, system, target, config)
    outcomes: list[AnalysisOutcome] = []
    with BufferedJsonlWriter(config.log_dir / "runs.jsonl") as telemetry:
        for spec in scenario.analyses:
            started = time.perf_counter()
            outcome = _run_analysis(run, spec)
            outcomes.append(outcome)
            telemetry.write(
                {
                    "scenario": str(path),
                    "analysis": spec.name,
                    "status": outcome.status,
                    "duration_ms": round((time.perf_counter() - started) * 1000, 3),
                }
            )

    exit_code = exit_code_for(outcomes)
    report = write_report(run, outcomes, exit_code)
    log_event(
        LOGGER,
        "scenario.complete",
        path=str(path),
        report=str(report),
        exit_code=exit_code,
        analyses=len(outcomes),
    )
    return exit_code
