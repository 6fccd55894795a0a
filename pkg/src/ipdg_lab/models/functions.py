"""Exact (manufactured) functions and model problems."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Protocol

import numpy as np

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]
TensorField = Callable[[np.ndarray], np.ndarray]
PartialField = Callable[[np.ndarray, int, int], np.ndarray]

BOUNDARY_SAMPLES = 100
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class FieldSample:
    """Values, gradients and Laplacians of a field at a batch of points."""

    values: np.ndarray
    gradients: np.ndarray
    laplacians: np.ndarray

    def __sub__(self, other: "FieldSample") -> "FieldSample":
        return FieldSample(
            self.values - other.values,
            self.gradients - other.gradients,
            self.laplacians - other.laplacians,
        )


class Field(Protocol):
    """Anything that can be sampled elementwise.

    ``elements`` has shape ``(E,)``, ``ref_points`` and ``points`` have shape
    ``(E, Q, 2)``: the same nodes in reference and physical coordinates.
    """

    def sample(
        self, elements: np.ndarray, ref_points: np.ndarray, points: np.ndarray
    ) -> FieldSample: ...


@dataclass(frozen=True, slots=True)
class FieldDifference:
    """Pointwise difference ``left - right`` of two fields."""

    left: Field
    right: Field

    def sample(
        self, elements: np.ndarray, ref_points: np.ndarray, points: np.ndarray
    ) -> FieldSample:
        return self.left.sample(elements, ref_points, points) - self.right.sample(
            elements, ref_points, points
        )


@dataclass(frozen=True, slots=True)
class ExactFunction:
    """A smooth function given by closed-form value, gradient, Laplacian and Hessian."""

    name: str
    value: ScalarField
    gradient: VectorField
    laplacian: ScalarField
    hessian: TensorField
    homogeneous_dirichlet: bool = False
    # ∂x^a ∂y^b u at the points, for the higher derivatives
    partial: PartialField | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.value(np.asarray(points, dtype=np.float64))

    def sample(
        self, elements: np.ndarray, ref_points: np.ndarray, points: np.ndarray
    ) -> FieldSample:
        return FieldSample(
            self.value(points), self.gradient(points), self.laplacian(points)
        )

    def derivative_norm2(self, points: np.ndarray, order: int) -> np.ndarray:
        """Squared Frobenius norm of the symmetric tensor ``D^order u``.

        Every mixed partial ``∂x^a ∂y^(order-a)`` appears ``binom(order, a)`` times.
        """
        if order == 2 and self.partial is None:
            return np.sum(self.hessian(points) ** 2, axis=(-2, -1))
        if self.partial is None:
            raise ValueError(
                f"'{self.name}' has closed-form derivatives only up to order 2, got {order}"
            )
        return sum(
            comb(order, a) * self.partial(points, a, order - a) ** 2 for a in range(order + 1)
        )

    def gradient_defect(self, points: np.ndarray, step: float = 1e-5) -> float:
        """Largest relative mismatch between the gradient and central differences."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        exact = self.gradient(points)
        approx = np.empty_like(exact)
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = step
            approx[:, axis] = (self.value(points + shift) - self.value(points - shift)) / (
                2.0 * step
            )
        scale = np.maximum(np.linalg.norm(exact, axis=1), 1.0)
        return float(np.max(np.linalg.norm(exact - approx, axis=1) / scale))


def boundary_points(samples: int = BOUNDARY_SAMPLES) -> np.ndarray:
    """Equally spaced points walking once around the boundary of the unit square."""
    t = np.linspace(0.0, 4.0, samples, endpoint=False)
    side, s = np.divmod(t, 1.0)
    x = np.select([side == 0, side == 1, side == 2], [s, 1.0, 1.0 - s], 0.0)
    y = np.select([side == 0, side == 1, side == 2], [0.0, s, 1.0], 1.0 - s)
    return np.stack([x, y], axis=1)


@dataclass(frozen=True, slots=True)
class Problem:
    """Poisson problem ``-Δu = f`` in the unit square with ``u = 0`` on the boundary."""

    name: str
    exact: ExactFunction

    def __post_init__(self) -> None:
        if not self.exact.homogeneous_dirichlet:
            raise ValueError(
                f"Problem '{self.name}' needs an exact solution flagged as vanishing "
                "on the boundary"
            )
        defect = self.boundary_defect()
        if defect >= BOUNDARY_TOL:
            raise ValueError(
                f"Exact solution of '{self.name}' does not vanish on the boundary "
                f"(max |u| = {defect:.3e})"
            )

    def boundary_defect(self, samples: int = BOUNDARY_SAMPLES) -> float:
        return float(np.max(np.abs(self.exact(boundary_points(samples)))))

    def source(self, points: np.ndarray) -> np.ndarray:
        return -self.exact.laplacian(np.asarray(points, dtype=np.float64))
