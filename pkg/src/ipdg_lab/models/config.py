"""Parameters of the interior penalty discretisation and of the linear solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_CSIGMA = 20.0


@dataclass(frozen=True, slots=True)
class PenaltyConfig:
    """Penalty law ``sigma = csigma * k**2 / h**penalty_exponent`` and the symmetry switch.

    ``theta = 1`` is the symmetric method, ``theta = -1`` the non-symmetric one.
    Exponents above one give super-penalisation.
    """

    csigma: float = DEFAULT_CSIGMA
    theta: float = 1.0
    penalty_exponent: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.csigma) or self.csigma <= 0:
            raise ValueError(f"csigma must be positive, got {self.csigma}")
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [-1, 1], got {self.theta}")
        if not math.isfinite(self.penalty_exponent) or self.penalty_exponent < 1.0:
            raise ValueError(
                f"penalty_exponent must be at least 1, got {self.penalty_exponent}"
            )

    @property
    def symmetric(self) -> bool:
        return self.theta == 1.0


@dataclass(frozen=True, slots=True)
class SolverSettings:
    """Tolerances for the Krylov solvers.

    ``tol`` is the target relative residual; a run that stalls above it is
    still accepted when it reached ``accept_tol``.
    """

    tol: float = 1e-12
    accept_tol: float = 1e-10
    maxit: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.tol <= self.accept_tol < 1:
            raise ValueError(
                f"Expected 0 < tol <= accept_tol < 1, got tol={self.tol}, "
                f"accept_tol={self.accept_tol}"
            )
        if self.maxit is not None and self.maxit < 1:
            raise ValueError(f"maxit must be positive, got {self.maxit}")

    def iteration_cap(self, size: int) -> int:
        if self.maxit is not None:
            return self.maxit
        return max(1000, 10 * size)
