"""Study CSV, rate plots and MatrixMarket dumps."""
from __future__ import annotations

import logging
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import scipy.io  # noqa: E402
import scipy.sparse as sp  # noqa: E402

from ..core.study import ERROR_COLUMNS, eoc_column  # noqa: E402
from ..models.report import StudyReport  # noqa: E402
from .formatting import format_float  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "level",
    "h_max",
    "alpha",
    "dofs",
    *ERROR_COLUMNS,
    "local_hk",
    "best_l2",
    "data_osc",
    "gamma",
    "c0",
    *(f"eoc_{column}_h" for column in ERROR_COLUMNS),
    *(f"eoc_{column}_dofs" for column in ERROR_COLUMNS),
    "ratio_local",
    "ratio_osc",
    "ratio_local_osc",
)

# Rate of each error in h for smooth solutions, offset from the degree k.
RATE_OFFSETS = {"l2_error": 1, "z_error": 1, "energy_error": 0, "h2h_error": -1}


def study_rows(report: StudyReport) -> list[list[str]]:
    """CSV cells of every level in :data:`CSV_COLUMNS` order."""
    rates_h = {column: eoc_column(report, column, "h") for column in ERROR_COLUMNS}
    rates_dofs = {column: eoc_column(report, column, "dofs") for column in ERROR_COLUMNS}
    rows = []
    for i, row in enumerate(report.rows):
        errors = row.errors
        rows.append(
            [
                str(row.level),
                format_float(row.h_max),
                format_float(row.alpha),
                str(row.dofs),
                *(format_float(getattr(errors, column)) for column in ERROR_COLUMNS),
                format_float(errors.local_seminorm),
                format_float(errors.best_l2),
                format_float(errors.data_osc),
                format_float(row.gamma),
                format_float(row.c0),
                *(format_float(rates_h[column][i]) for column in ERROR_COLUMNS),
                *(format_float(rates_dofs[column][i]) for column in ERROR_COLUMNS),
                format_float(errors.local_ratio),
                format_float(errors.oscillation_ratio),
                format_float(errors.local_oscillation_ratio),
            ]
        )
    return rows


def flag_comment(report: StudyReport) -> str:
    settings = " ".join(f"{key}={value}" for key, value in report.flags.items())
    head = f"# ipdg-lab family={report.family} k={report.k} problem={report.problem}"
    return f"{head} {settings}" if settings else head


def write_study_csv(report: StudyReport, path: str | os.PathLike[str]) -> Path:
    """One comment line with the flags, a header row, then one row per level."""
    target = Path(path)
    with target.open("w", encoding="utf-8", newline="") as handle:
        handle.write(flag_comment(report) + "\n")
        # cells stay preformatted strings so reruns are byte-identical
        table = pd.DataFrame(study_rows(report), columns=list(CSV_COLUMNS), dtype=str)
        table.to_csv(handle, index=False, lineterminator="\n")
    logger.info("Study table written to %s (%s levels)", target, report.levels)
    return target


def write_rate_plot(report: StudyReport, path: str | os.PathLike[str]) -> Path:
    """Log-log plot of every error against ``h_max`` with reference slope triangles."""
    target = Path(path)
    sizes = [row.h_max for row in report.rows]
    with plt.rc_context({"svg.hashsalt": "ipdg-lab", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
        for column in ERROR_COLUMNS:
            errors = [getattr(row.errors, column) for row in report.rows]
            if not all(e > 0 for e in errors):
                continue
            (line,) = ax.loglog(sizes, errors, marker="o", label=column.replace("_error", ""))
            rate = report.k + RATE_OFFSETS[column]
            if rate > 0 and len(sizes) >= 2:
                _slope_triangle(ax, sizes[-2], sizes[-1], errors[-1], rate, line.get_color())
        ax.set_xlabel("h_max")
        ax.set_ylabel("error")
        ax.set_title(f"{report.family}, k={report.k}, {report.problem}")
        ax.grid(True, which="both", linewidth=0.3)
        ax.legend(loc="lower right")
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Rate plot written to %s", target)
    return target


def _slope_triangle(ax, h_coarse: float, h_fine: float, error: float, rate: int, color: str) -> None:
    y0 = 0.5 * error
    y1 = y0 * (h_coarse / h_fine) ** rate
    ax.plot([h_fine, h_coarse, h_coarse, h_fine], [y0, y0, y1, y0], color=color, linewidth=0.8)
    ax.annotate(str(rate), (h_coarse, (y0 * y1) ** 0.5), color=color, fontsize=8,
                xytext=(3, 0), textcoords="offset points", va="center")


def write_matrix_market(
    matrix: sp.spmatrix, path: str | os.PathLike[str], *, symmetric: bool = False
) -> Path:
    """Dump a sparse matrix in coordinate MatrixMarket format."""
    target = Path(path)
    scipy.io.mmwrite(
        str(target), sp.coo_matrix(matrix), field="real",
        symmetry="symmetric" if symmetric else "general",
    )
    logger.info("Matrix %sx%s (%s nonzeros) written to %s", *matrix.shape, matrix.nnz, target)
    return target
