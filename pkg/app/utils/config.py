from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from app.utils.constants import DEFAULT_DOT_EDGE_LIMIT

load_dotenv()

DEFAULT_DATA_ROOT = Path("./data")
DEFAULT_RUNS_SUBDIR = "runs"
DEFAULT_LOGS_SUBDIR = "logs"
DATA_ROOT_ENV = "HYPERBOLIC_LAB_DATA_ROOT"
THREADS_ENV = "HYPERBOLIC_LAB_THREADS"
LOG_LEVEL_ENV = "HYPERBOLIC_LAB_LOG_LEVEL"
LOG_DIR_ENV = "HYPERBOLIC_LAB_LOG_DIR"
OUTPUT_ROOT_ENV = "HYPERBOLIC_LAB_OUTPUT_ROOT"
DOT_EDGE_LIMIT_ENV = "HYPERBOLIC_LAB_DOT_EDGE_LIMIT"


@dataclass(frozen=True)
class RuntimeConfig:
    threads: int
    log_dir: Path
    log_level: str
    output_root: Path
    dot_edge_limit: int


def get_data_root() -> Path:
    return Path(os.getenv(DATA_ROOT_ENV, DEFAULT_DATA_ROOT)).expanduser()


def get_threads() -> int:
    raw = os.getenv(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def get_log_dir(data_root: Path | None = None) -> Path:
    explicit = os.getenv(LOG_DIR_ENV)
    if explicit:
        return Path(explicit).expanduser()
    root = data_root if data_root is not None else get_data_root()
    return (root / DEFAULT_LOGS_SUBDIR).expanduser()


def get_output_root(data_root: Path | None = None) -> Path:
    explicit = os.getenv(OUTPUT_ROOT_ENV)
    if explicit:
        return Path(explicit).expanduser()
    root = data_root if data_root is not None else get_data_root()
    return (root / DEFAULT_RUNS_SUBDIR).expanduser()


def load_runtime_config(data_root: Path | None = None) -> RuntimeConfig:
    return RuntimeConfig(
        threads=get_threads(),
        log_dir=get_log_dir(data_root),
        log_level=os.getenv(LOG_LEVEL_ENV, "INFO"),
        output_root=get_output_root(data_root),
        dot_edge_limit=int(os.getenv(DOT_EDGE_LIMIT_ENV, DEFAULT_DOT_EDGE_LIMIT)),
    )
