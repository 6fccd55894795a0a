"""Quadrature rules on the reference triangle and on the unit interval."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 20


@dataclass(frozen=True, slots=True)
class QuadratureRule:
    """Points and weights with the polynomial degree they integrate exactly.

    Volume rules live on the triangle with vertices (0,0), (1,0), (0,1) and
    their weights sum to 1/2; face rules live on [0, 1] with weights summing to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def map_to_edge(self, start: np.ndarray, end: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Physical points and weights of a face rule on the segment ``start -> end``."""
        if self.points.ndim != 1:
            raise ValueError("Only face rules can be mapped onto an edge")
        start = np.asarray(start, dtype=np.float64)
        end = np.asarray(end, dtype=np.float64)
        length = float(np.linalg.norm(end - start))
        points = start[None, :] + self.points[:, None] * (end - start)[None, :]
        return points, self.weights * length


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(
            f"Unsupported quadrature order {order}; supported range is 1..{MAX_ORDER}"
        )


@lru_cache(maxsize=None)
def _volume_rule(order: int) -> QuadratureRule:
    n = math.ceil((order + 1) / 2)
    a, wa = roots_legendre(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    aa, bb = np.meshgrid(a, b, indexing="ij")
    x = 0.25 * (1.0 + aa) * (1.0 - bb)
    y = 0.5 * (1.0 + bb)
    weights = np.outer(wa, wb).reshape(-1) / 8.0
    points = np.stack([x.reshape(-1), y.reshape(-1)], axis=1)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points, weights=weights, degree=2 * n - 1)


def volume_quadrature(order: int) -> QuadratureRule:
    """Collapsed Gauss rule exact for polynomials of total degree ``order``."""
    _check_order(order)
    return _volume_rule(order)


@lru_cache(maxsize=None)
def _face_rule(order: int) -> QuadratureRule:
    n = math.ceil((order + 1) / 2)
    t, w = roots_legendre(n)
    points = 0.5 * (t + 1.0)
    weights = 0.5 * w
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points, weights=weights, degree=2 * n - 1)


def face_quadrature(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact up to degree ``order`` (2·points - 1)."""
    _check_order(order)
    return _face_rule(order)


def reference_moment(a: int, b: int) -> float:
    """Exact integral of x**a * y**b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
