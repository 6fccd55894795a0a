"""Проверка параметров командной строки и путей."""
from __future__ import annotations

import math
import os
from pathlib import Path

from ..core.problems import PROBLEMS
from ..core.space import MAX_DEGREE
from ..core.study import FAMILIES, MIN_LEVELS
from .settings import RunConfig

SUPPORTED_MESH_EXTENSIONS = {".json"}


def validate_input_file(path: str | os.PathLike[str]) -> Path:
    """Check that a mesh file exists and has a supported extension."""
    candidate = Path(path).expanduser().resolve()
    if not candidate.exists():
        raise FileNotFoundError(f"File not found: {candidate}")
    if not candidate.is_file():
        raise ValueError(f"Not a file: {candidate}")
    if candidate.suffix.lower() not in SUPPORTED_MESH_EXTENSIONS:
        raise ValueError(
            f"Unsupported mesh file extension: {candidate.suffix}. "
            f"Supported: {', '.join(sorted(SUPPORTED_MESH_EXTENSIONS))}"
        )
    return candidate


def validate_output_dir(path: str | os.PathLike[str]) -> Path:
    """Check that a directory exists and is writable."""
    directory = Path(path).expanduser().resolve()
    if not directory.exists():
        raise FileNotFoundError(f"Directory not found: {directory}")
    if not directory.is_dir():
        raise ValueError(f"Not a directory: {directory}")
    if not os.access(directory, os.W_OK):
        raise PermissionError(f"No write access to directory: {directory}")
    return directory


def validate_output_file(path: str | os.PathLike[str]) -> Path:
    """Check that an output file can be created in its directory."""
    candidate = Path(path).expanduser().resolve()
    validate_output_dir(candidate.parent)
    if candidate.exists() and candidate.is_dir():
        raise ValueError(f"Output path is a directory: {candidate}")
    return candidate


def _positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"--{name} must be positive, got {value}")


def _at_least(name: str, value: int, minimum: int) -> None:
    if value < minimum:
        raise ValueError(f"--{name} must be at least {minimum}, got {value}")


def validate_run_config(config: RunConfig) -> RunConfig:
    """Reject out-of-range flags before any computation starts."""
    if config.family not in FAMILIES:
        raise ValueError(f"Unknown mesh family '{config.family}'. Choose from: {', '.join(FAMILIES)}")
    if config.problem not in PROBLEMS:
        raise ValueError(f"Unknown problem '{config.problem}'. Choose from: {', '.join(PROBLEMS)}")
    if not 1 <= config.k <= MAX_DEGREE:
        raise ValueError(f"--k must lie in 1..{MAX_DEGREE}, got {config.k}")
    if not 0.0 < config.beta < 1.0:
        raise ValueError(f"--beta must lie in (0, 1), got {config.beta}")
    if not 0.0 < config.epsilon <= 0.25:
        raise ValueError(f"--epsilon must lie in (0, 1/4], got {config.epsilon}")
    if not -1.0 <= config.theta <= 1.0:
        raise ValueError(f"--theta must lie in [-1, 1], got {config.theta}")
    if config.penalty_exponent < 1.0:
        raise ValueError(f"--penalty-exponent must be at least 1, got {config.penalty_exponent}")
    if not 0 < config.tol <= config.accept_tol < 1:
        raise ValueError(
            f"Expected 0 < --tol <= --accept-tol < 1, got {config.tol} and {config.accept_tol}"
        )
    _positive("csigma", config.csigma)
    _positive("layer-epsilon", config.layer_epsilon)
    _positive("ctilde", config.ctilde)
    if config.cinv is not None:
        _positive("cinv", config.cinv)
    _at_least("n", config.n, 2 if config.family == "shishkin" else 1)
    _at_least("n0", config.n0, 2 if config.family == "shishkin" else 1)
    _at_least("base-levels", config.base_levels, 1)
    _at_least("corner-passes", config.corner_passes, 0)
    _at_least("samples", config.samples, 100)
    _at_least("seed", config.seed, 0)
    if config.corner_cells is not None:
        _at_least("corner-cells", config.corner_cells, 1)
    _at_least("levels", config.levels, MIN_LEVELS if config.command == "study" else 1)
    if config.mesh_path is not None:
        validate_input_file(config.mesh_path)
    for path in (config.out, config.svg, config.log_file):
        if path is not None:
            validate_output_file(path)
    if config.mtx_dir is not None:
        validate_output_dir(config.mtx_dir)
    return config
