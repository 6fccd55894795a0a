"""Записи результатов: решения, проверки Ритца, исследования сходимости."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mesh import GradingReport


@dataclass(frozen=True, slots=True)
class ErrorReport:
    """Errors of a discrete solution in every mesh-dependent norm plus the bound quantities."""

    l2_error: float
    z_error: float
    energy_error: float
    h2h_error: float
    # h^{k+1} ||D^{k+1}u||, the h⁴ Hessian term when k = 1
    local_seminorm: float
    best_l2: float
    data_osc: float
    dofs: int
    grading: GradingReport

    @property
    def local_ratio(self) -> float:
        return self.l2_error / self.local_seminorm if self.local_seminorm > 0 else math.nan

    @property
    def oscillation_ratio(self) -> float:
        """``l2_error / (best_l2 + data_osc)``, the constant of the a priori L² bound."""
        denom = self.best_l2 + self.data_osc
        return self.l2_error / denom if denom > 0 else math.nan

    @property
    def local_oscillation_ratio(self) -> float:
        """``l2_error / (local_seminorm + data_osc)``; settles once data_osc stops dominating."""
        denom = self.local_seminorm + self.data_osc
        return self.l2_error / denom if denom > 0 else math.nan

    def summary_lines(self) -> list[str]:
        return [
            f"dofs: {self.dofs}",
            f"l2_error: {self.l2_error:.6e}",
            f"z_error: {self.z_error:.6e}",
            f"energy_error: {self.energy_error:.6e}",
            f"h2h_error: {self.h2h_error:.6e}",
            f"local_seminorm: {self.local_seminorm:.6e}",
            f"best_l2: {self.best_l2:.6e}",
            f"data_osc: {self.data_osc:.6e}",
            f"l2 / local_seminorm: {self.local_ratio:.6g}",
            f"l2 / (best_l2 + data_osc): {self.oscillation_ratio:.6g}",
            f"l2 / (local_seminorm + data_osc): {self.local_oscillation_ratio:.6g}",
            *self.grading.summary_lines(),
        ]


@dataclass(frozen=True, slots=True)
class RitzReport:
    """Устойчивость и квазиоптимальность проекции Ритца на одной сетке."""

    u_z: float
    ritz_z: float
    error_z: float
    best_z: float
    error_l2: float
    gamma: float | None

    @property
    def stability_ratio(self) -> float:
        return self.ritz_z / self.u_z if self.u_z > 0 else math.nan

    @property
    def stability_bound(self) -> float | None:
        return 1.0 / self.gamma if self.gamma else None

    @property
    def quasi_optimality_bound(self) -> float | None:
        return (1.0 + 1.0 / self.gamma) * self.best_z if self.gamma else None

    def summary_lines(self) -> list[str]:
        lines = [
            f"|u|_Z: {self.u_z:.6e}",
            f"|Ru|_Z: {self.ritz_z:.6e}",
            f"stability ratio |Ru|_Z/|u|_Z: {self.stability_ratio:.6g}",
            f"|u - Ru|_Z: {self.error_z:.6e}",
            f"|u - P_k u|_Z: {self.best_z:.6e}",
            f"|u - Ru|_L2: {self.error_l2:.6e}",
        ]
        if self.gamma is not None:
            lines += [
                f"gamma: {self.gamma:.6g}",
                f"stability bound 1/gamma: {self.stability_bound:.6g}",
                f"quasi-optimality bound: {self.quasi_optimality_bound:.6e}",
            ]
        else:
            lines.append("gamma: skipped (too many DOFs for the dense path)")
        return lines


@dataclass(frozen=True, slots=True)
class ContinuityReport:
    sampled: float
    exact: float | None
    samples: int


@dataclass(frozen=True, slots=True)
class StudyRow:
    level: int
    h_max: float
    alpha: float
    dofs: int
    errors: ErrorReport
    gamma: float | None = None
    c0: float | None = None


@dataclass(slots=True)
class StudyReport:
    """Rows ordered by decreasing ``h_max`` together with the flags that produced them."""

    family: str
    k: int
    problem: str
    rows: list[StudyRow] = field(default_factory=list)
    flags: dict[str, object] = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return len(self.rows)
