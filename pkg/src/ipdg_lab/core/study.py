"""Исследования сходимости по уровням измельчения семейства сеток."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import linregress

from ..models.config import PenaltyConfig, SolverSettings
from ..models.functions import Problem
from ..models.mesh import Mesh
from ..models.report import ErrorReport, StudyReport, StudyRow
from .analysis import coercivity_constant, infsup_gamma, solve_poisson
from .linalg import MAX_DENSE_DOFS
from .mesh_builder import gen_geometric, gen_shishkin, gen_uniform
from .refinement import elements_touching, red_refine, refine_nvb, refine_nvb_uniform

logger = logging.getLogger(__name__)

FAMILIES = ("uniform", "geometric", "shishkin", "nvb")
MIN_LEVELS = 3

ERROR_COLUMNS = ("l2_error", "z_error", "energy_error", "h2h_error")


class StudyAborted(RuntimeError):
    """Уровень исследования не удался; ``report`` хранит уже готовые строки."""

    def __init__(self, message: str, report: StudyReport) -> None:
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, slots=True)
class MeshFamily:
    """A sequence of meshes indexed by refinement level.

    * ``uniform``: ``gen_uniform(n0 * 2**level)``
    * ``geometric``: ``gen_geometric(beta, base_levels)`` red-refined ``level`` times
    * ``shishkin``: ``gen_shishkin(epsilon, n0 * 2**level)``
    * ``nvb``: ``gen_uniform(n0)`` bisected ``2*level`` times globally, then
      ``corner_passes`` rounds marking the elements at the origin
    """

    kind: str
    n0: int = 4
    beta: float = 0.9
    base_levels: int = 4
    corner_cells: int | None = None
    epsilon: float = 0.01
    corner_passes: int = 3

    def __post_init__(self) -> None:
        if self.kind not in FAMILIES:
            raise ValueError(f"Unknown mesh family '{self.kind}'. Choose from: {', '.join(FAMILIES)}")
        if self.n0 < 1:
            raise ValueError(f"n0 must be positive, got {self.n0}")
        if self.corner_passes < 0:
            raise ValueError(f"corner_passes must be non-negative, got {self.corner_passes}")

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"uniform(n0={self.n0})"
        if self.kind == "geometric":
            return f"geometric(beta={self.beta:g}, N={self.base_levels})"
        if self.kind == "shishkin":
            return f"shishkin(eps={self.epsilon:g}, n0={self.n0})"
        return f"nvb(n0={self.n0}, corner_passes={self.corner_passes})"

    def mesh(self, level: int) -> Mesh:
        if level < 0:
            raise ValueError(f"Level must be non-negative, got {level}")
        if self.kind == "uniform":
            return gen_uniform(self.n0 * 2**level)
        if self.kind == "shishkin":
            return gen_shishkin(self.epsilon, self.n0 * 2**level)
        if self.kind == "geometric":
            mesh = gen_geometric(self.beta, self.base_levels, self.corner_cells)
            for _ in range(level):
                mesh = red_refine(mesh)
            return mesh
        mesh = refine_nvb_uniform(gen_uniform(self.n0), 2 * level)
        for _ in range(self.corner_passes):
            mesh = refine_nvb(mesh, elements_touching(mesh))
        return mesh


def eoc(errors: Sequence[float], sizes: Sequence[float]) -> list[float]:
    """``log(e_i/e_{i+1}) / log(s_i/s_{i+1})`` per level; NaN on the first level."""
    rates = [math.nan]
    for i in range(1, len(errors)):
        e0, e1, s0, s1 = errors[i - 1], errors[i], sizes[i - 1], sizes[i]
        if e0 > 0 and e1 > 0 and s0 > 0 and s1 > 0 and s0 != s1:
            rates.append(math.log(e0 / e1) / math.log(s0 / s1))
        else:
            rates.append(math.nan)
    return rates


def eoc_column(report: StudyReport, column: str, against: str = "h") -> list[float]:
    """EOC of an error column against ``h_max`` (``"h"``) or ``dofs**-1/2`` (``"dofs"``)."""
    if column not in ERROR_COLUMNS:
        raise ValueError(f"Unknown error column '{column}'. Choose from: {', '.join(ERROR_COLUMNS)}")
    errors = [getattr(row.errors, column) for row in report.rows]
    if against == "h":
        sizes = [row.h_max for row in report.rows]
    elif against == "dofs":
        sizes = [row.dofs**-0.5 for row in report.rows]
    else:
        raise ValueError(f"EOC is measured against 'h' or 'dofs', got '{against}'")
    return eoc(errors, sizes)


def fitted_rate(report: StudyReport, column: str) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h_max)`` over all levels."""
    if column not in ERROR_COLUMNS:
        raise ValueError(f"Unknown error column '{column}'. Choose from: {', '.join(ERROR_COLUMNS)}")
    points = [(row.h_max, getattr(row.errors, column)) for row in report.rows]
    points = [(h, e) for h, e in points if h > 0 and e > 0]
    if len(points) < 2:
        return math.nan
    log_h, log_e = np.log(np.array(points)).T
    return float(linregress(log_h, log_e).slope)


def ratio_constant(report: StudyReport, name: str) -> float:
    """Largest per-level value of an :class:`ErrorReport` ratio property."""
    values = [getattr(row.errors, name) for row in report.rows]
    finite = [v for v in values if np.isfinite(v)]
    return max(finite) if finite else math.nan


def _level_constants(
    mesh: Mesh, k: int, cfg: PenaltyConfig, dofs: int, with_gamma: bool, with_c0: bool
) -> tuple[float | None, float | None]:
    if not (with_gamma or with_c0):
        return None, None
    if not cfg.symmetric:
        logger.info("Stability constants need theta = 1; skipped for theta=%s", cfg.theta)
        return None, None
    if dofs > MAX_DENSE_DOFS:
        logger.warning(
            "Skipping stability constants: %s DOFs exceed the dense limit of %s", dofs, MAX_DENSE_DOFS
        )
        return None, None
    gamma = infsup_gamma(mesh, k, cfg) if with_gamma else None
    c0 = coercivity_constant(mesh, k, cfg) if with_c0 else None
    return gamma, c0


def run_study(
    family: MeshFamily,
    levels: int,
    k: int,
    cfg: PenaltyConfig,
    problem: Problem,
    settings: SolverSettings | None = None,
    *,
    with_gamma: bool = False,
    with_c0: bool = False,
    flags: dict[str, object] | None = None,
) -> StudyReport:
    """Solve on ``levels`` consecutive meshes of the family and collect every diagnostic.

    Levels run in order; a failing level raises :class:`StudyAborted` carrying
    the rows finished so far.
    """
    if levels < MIN_LEVELS:
        raise ValueError(f"A study needs at least {MIN_LEVELS} levels, got {levels}")
    report = StudyReport(
        family=family.describe(), k=k, problem=problem.name, flags=dict(flags or {})
    )
    for level in range(levels):
        try:
            mesh = family.mesh(level)
            _, errors = solve_poisson(mesh, k, cfg, problem, settings)
            gamma, c0 = _level_constants(mesh, k, cfg, errors.dofs, with_gamma, with_c0)
        except (RuntimeError, ValueError) as exc:
            logger.error("Study level %s failed: %s", level, exc)
            raise StudyAborted(f"Level {level} of {family.describe()} failed: {exc}", report) from exc
        row = _row(level, errors, gamma, c0)
        report.rows.append(row)
        logger.info(
            "Level %s: h_max=%.4g, dofs=%s, l2=%.4e, z=%.4e",
            level,
            row.h_max,
            row.dofs,
            errors.l2_error,
            errors.z_error,
        )
    return report


def _row(level: int, errors: ErrorReport, gamma: float | None, c0: float | None) -> StudyRow:
    return StudyRow(
        level=level,
        h_max=errors.grading.h_max,
        alpha=errors.grading.alpha,
        dofs=errors.dofs,
        errors=errors,
        gamma=gamma,
        c0=c0,
    )
