"""Centralised numerical tolerances, search parameters and report constants."""

from __future__ import annotations

REPORT_SCHEMA = "hyperbolic-lab/1"
"""Schema tag written into every report.json."""

POINT_TOLERANCE = 1e-8
"""Two phase-space points closer than this are treated as the same point."""

PERIOD_RETURN_TOLERANCE = 1e-9
"""A periodic point must return to itself within this distance after `period` steps."""

PERIOD_MINIMALITY_TOLERANCE = 1e-6
"""No smaller power may return a periodic point within this distance."""

HYPERBOLICITY_TOLERANCE = 1e-9
"""Eigenvalues within this distance of the unit circle make a point non-hyperbolic."""

NEWTON_SEEDS_PER_AXIS = 64
"""Seed grid size per axis for the Newton periodic-point search."""

NEWTON_MAX_ITERATIONS = 30
"""Iteration cap for a single Newton run; seeds that do not converge are dropped."""

NEWTON_DAMPING = 0.5
"""Step damping applied when a full Newton step overshoots."""

NEWTON_STEP_LIMIT = 0.25
"""Newton steps longer than this (in the lifted metric) count as overshoot."""

MAX_PERIOD_2D = 12
"""Largest period bound accepted by the periodic-point search on 2-D systems."""

RESOLUTION_MIN = 16
RESOLUTION_MAX = 1024

GRID_SNAP_TOLERANCE = 1e-9
"""Scaled coordinates this close to a grid line (in box widths) are treated as lying on it."""

ORBIT_STEPS_PER_RESOLUTION = 10
"""Orbit confirmation iterates at most this many steps per box along an axis."""

ORBIT_EXTRA_SAMPLES = 64
"""Seeded random samples added to the lattice samples of orbit confirmation."""

SHADOW_AMBIGUITY_TOLERANCE = 1e-9
"""Horseshoe points this close to a strip boundary cannot be assigned a branch safely."""

SIMILARITY_TOLERANCE = 1e-7
"""Trace/determinant agreement required between period-power derivatives."""

COMMUTATION_TOLERANCE = 1e-9
"""Commutation residual below which two maps are treated as commuting."""

RESONANCE_J_MAX = 20
RESONANCE_TOLERANCE = 1e-9

KOENIGS_MAX_ITERATIONS = 200
LINEARITY_DERIVATIVE_STEP = 1e-6

MAX_SYMBOLIC_WINDOW = 12
"""Upper bound for homoclinic windows and local-product depth."""

DEFAULT_DOT_EDGE_LIMIT = 200_000

EXIT_OK = 0
EXIT_EXECUTION_ERROR = 1
EXIT_VERDICT_FAILED = 2
