from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

# Ensure package imports work when launched as a file via `python app/main.py`.
ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from app.services.errors import LabError
from app.services.pipeline import run_scenario
from app.services.plotdata import emit_plotdata
from app.utils.constants import EXIT_EXECUTION_ERROR, EXIT_OK
from app.utils.logging import get_logger

LOGGER = get_logger(__name__)

PROGRAM = "hyperbolic-lab"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROGRAM,
        description="Chain recurrence, spectral decomposition and symbolic codings of toy systems.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Execute the analyses of a scenario file.")
    run_parser.add_argument("scenario", type=Path)
    run_parser.add_argument("--out", type=Path, default=None, help="Override output_dir.")
    run_parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed.")

    plot_parser = commands.add_parser("plot", help="Write plotting tables beside a report.json.")
    plot_parser.add_argument("report", type=Path)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_scenario(args.scenario, output_dir=args.out, seed=args.seed)
    try:
        for path in emit_plotdata(args.report):
            print(path)
    except LabError as exc:
        LOGGER.error("%s", exc)
        return EXIT_EXECUTION_ERROR
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
