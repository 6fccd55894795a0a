"""Broken polynomial spaces on triangular meshes.

The reference basis is orthonormal on the triangle (0,0), (1,0), (0,1). It is
obtained by Gram-Schmidt on monomials in the centred, scaled coordinates
``s = (3x - 1)/2`` and ``t = (3y - 1)/2``, ordered by total degree, carried
out in exact rational arithmetic. The first ``(j+1)(j+2)/2`` functions span
``P_j`` for every ``j <= k``, so truncating coefficients is the L² projection
onto lower degrees.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from ..models.functions import FieldSample
from ..models.mesh import Mesh
from .quadrature import MAX_ORDER, QuadratureRule, face_quadrature, volume_quadrature

logger = logging.getLogger(__name__)

MAX_DEGREE = 8
REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_SCALE = 1.5


def monomial_exponents(k: int) -> list[tuple[int, int]]:
    """Exponents ``(a, b)`` of all monomials of total degree <= k, graded order."""
    return [(d - b, b) for d in range(k + 1) for b in range(d + 1)]


def _falling(n: int, m: int) -> int:
    return math.perm(n, m) if m <= n else 0


@lru_cache(maxsize=None)
def _centred_moment(a: int, b: int) -> Fraction:
    """Exact integral of s**a * t**b over the reference triangle."""
    total = Fraction(0)
    for p in range(a + 1):
        for q in range(b + 1):
            total += (
                math.comb(a, p)
                * math.comb(b, q)
                * Fraction(3, 2) ** (p + q)
                * Fraction(-1, 2) ** (a - p + b - q)
                * Fraction(math.factorial(p) * math.factorial(q), math.factorial(p + q + 2))
            )
    return total


@lru_cache(maxsize=None)
def _orthonormal_coefficients(k: int) -> np.ndarray:
    exps = monomial_exponents(k)
    n = len(exps)
    gram = [
        [_centred_moment(ai + aj, bi + bj) for (aj, bj) in exps] for (ai, bi) in exps
    ]
    lower = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    diag = [Fraction(0)] * n
    for j in range(n):
        diag[j] = gram[j][j] - sum(lower[j][m] ** 2 * diag[m] for m in range(j))
        for i in range(j + 1, n):
            lower[i][j] = (
                gram[i][j] - sum(lower[i][m] * lower[j][m] * diag[m] for m in range(j))
            ) / diag[j]
    inverse = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            inverse[i][j] = -sum(lower[i][m] * inverse[m][j] for m in range(j, i))
    coeffs = np.array(
        [[float(inverse[i][j]) / math.sqrt(diag[i]) for j in range(n)] for i in range(n)]
    )
    coeffs.setflags(write=False)
    return coeffs


def _monomials(points: np.ndarray, exps: list[tuple[int, int]], dx: int, dy: int) -> np.ndarray:
    s = _SCALE * points[..., 0] - 0.5
    t = _SCALE * points[..., 1] - 0.5
    columns = []
    for a, b in exps:
        factor = _falling(a, dx) * _falling(b, dy) * _SCALE ** (dx + dy)
        if factor == 0:
            columns.append(np.zeros_like(s))
        else:
            columns.append(factor * s ** (a - dx) * t ** (b - dy))
    return np.stack(columns, axis=-1)


@dataclass(frozen=True)
class ReferenceBasis:
    """Ортонормированный базис ``P_k`` на опорном треугольнике."""

    degree: int
    exponents: tuple[tuple[int, int], ...]
    coefficients: np.ndarray

    @property
    def size(self) -> int:
        return len(self.exponents)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values ``(..., n)`` at reference points ``(..., 2)``."""
        return _monomials(points, list(self.exponents), 0, 0) @ self.coefficients.T

    def gradients(self, points: np.ndarray) -> np.ndarray:
        exps = list(self.exponents)
        return np.stack(
            [
                _monomials(points, exps, 1, 0) @ self.coefficients.T,
                _monomials(points, exps, 0, 1) @ self.coefficients.T,
            ],
            axis=-1,
        )

    def hessians(self, points: np.ndarray) -> np.ndarray:
        exps = list(self.exponents)
        dxx = _monomials(points, exps, 2, 0) @ self.coefficients.T
        dxy = _monomials(points, exps, 1, 1) @ self.coefficients.T
        dyy = _monomials(points, exps, 0, 2) @ self.coefficients.T
        return np.stack(
            [np.stack([dxx, dxy], axis=-1), np.stack([dxy, dyy], axis=-1)], axis=-2
        )

    def project_monomial(self, a: int, b: int, rule: QuadratureRule) -> np.ndarray:
        """Coefficients of ``x**a * y**b`` (reference coordinates) in this basis."""
        pts = rule.points
        target = pts[:, 0] ** a * pts[:, 1] ** b
        return (rule.weights * target) @ self.values(pts)


@lru_cache(maxsize=None)
def reference_basis(k: int) -> ReferenceBasis:
    if not 0 <= k <= MAX_DEGREE:
        raise ValueError(f"Polynomial degree must lie in 0..{MAX_DEGREE}, got {k}")
    exps = tuple(monomial_exponents(k))
    return ReferenceBasis(degree=k, exponents=exps, coefficients=_orthonormal_coefficients(k))


def physical_gradients(inverse_jacobians: np.ndarray, ref_grads: np.ndarray) -> np.ndarray:
    """Map reference gradients ``(E, Q, n, 2)`` with ``J^{-T}`` per element."""
    return np.einsum("ecd,eqnc->eqnd", inverse_jacobians, ref_grads)


def physical_laplacians(inverse_jacobians: np.ndarray, ref_hessians: np.ndarray) -> np.ndarray:
    """Laplacians ``(E, Q, n)`` from reference Hessians ``(E, Q, n, 2, 2)``."""
    return np.einsum(
        "ecd,eqncg,egd->eqn", inverse_jacobians, ref_hessians, inverse_jacobians
    )


@dataclass(frozen=True)
class VolumeData:
    rule: QuadratureRule
    points: np.ndarray  # (E, Q, 2) physical
    weights: np.ndarray  # (E, Q) physical
    values: np.ndarray  # (E, Q, n)
    gradients: np.ndarray  # (E, Q, n, 2)
    laplacians: np.ndarray  # (E, Q, n)


@dataclass(frozen=True)
class FaceSide:
    elements: np.ndarray  # (F,)
    normals: np.ndarray  # (F, 2) outward from this side
    ref_points: np.ndarray  # (F, Q, 2)
    values: np.ndarray  # (F, Q, n)
    gradients: np.ndarray  # (F, Q, n, 2)


@dataclass(frozen=True)
class FaceData:
    """Quadrature on a batch of faces with traces from each neighbour."""

    faces: np.ndarray
    points: np.ndarray  # (F, Q, 2)
    weights: np.ndarray  # (F, Q), include the face length
    h: np.ndarray  # (F,)
    sides: tuple[FaceSide, ...]


class DGSpace:
    """Discontinuous piecewise polynomials of total degree ``k``.

    Degrees of freedom are element-major: element ``K`` owns the contiguous
    block ``K*n .. K*n + n - 1`` with ``n = (k+1)(k+2)/2``. On ``K`` the basis is
    the reference basis pulled back and divided by ``sqrt|det J_K|``, so every
    physical mass block is the identity.
    """

    def __init__(self, mesh: Mesh, k: int) -> None:
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
            raise ValueError(f"Polynomial degree must be an integer, got {k!r}")
        if k < 1:
            raise ValueError(f"Polynomial degree must be at least 1, got {k}")
        if k > MAX_DEGREE:
            raise ValueError(f"Polynomial degree must not exceed {MAX_DEGREE}, got {k}")
        self.mesh = mesh
        self.k = int(k)
        self.basis = reference_basis(self.k)
        self.dofs_per_elem = (self.k + 1) * (self.k + 2) // 2
        self.ndofs = mesh.nelems * self.dofs_per_elem
        self.volume_order = 2 * self.k
        self.face_order = 2 * self.k + 2
        self.error_order = min(2 * self.k + 4, MAX_ORDER)
        self.scales = 1.0 / np.sqrt(np.abs(mesh.det_jacobians))
        self._volume_cache: dict[int, VolumeData] = {}
        self._face_cache: dict[tuple[int, bool], FaceData] = {}

    def __repr__(self) -> str:
        return f"DGSpace(k={self.k}, elements={self.mesh.nelems}, dofs={self.ndofs})"

    def element_dofs(self, elements: np.ndarray | int | None = None) -> np.ndarray:
        """Global DOF indices ``(E, n)`` of the given elements (all by default)."""
        if elements is None:
            elements = np.arange(self.mesh.nelems)
        elements = np.asarray(elements)
        return elements[..., None] * self.dofs_per_elem + np.arange(self.dofs_per_elem)

    def volume_data(self, order: int | None = None) -> VolumeData:
        order = self.volume_order if order is None else order
        if order not in self._volume_cache:
            mesh = self.mesh
            rule = volume_quadrature(order)
            elements = np.arange(mesh.nelems)
            points = mesh.to_physical(elements, rule.points)
            weights = rule.weights[None, :] * np.abs(mesh.det_jacobians)[:, None]
            ref_values = self.basis.values(rule.points)
            ref_grads = np.broadcast_to(
                self.basis.gradients(rule.points), (mesh.nelems, *ref_values.shape, 2)
            )
            ref_hess = np.broadcast_to(
                self.basis.hessians(rule.points), (mesh.nelems, *ref_values.shape, 2, 2)
            )
            scales = self.scales[:, None, None]
            values = scales * ref_values[None, :, :]
            grads = physical_gradients(mesh.inverse_jacobians, ref_grads) * scales[..., None]
            laps = physical_laplacians(mesh.inverse_jacobians, ref_hess) * scales
            logger.debug(
                "Volume data: order %s, %s nodes per element, %s elements",
                order,
                rule.size,
                mesh.nelems,
            )
            self._volume_cache[order] = VolumeData(rule, points, weights, values, grads, laps)
        return self._volume_cache[order]

    def face_data(self, interior: bool, order: int | None = None) -> FaceData:
        """Traces on all interior faces (two sides) or all boundary faces (one side)."""
        order = self.face_order if order is None else order
        key = (order, interior)
        if key not in self._face_cache:
            mesh = self.mesh
            faces = mesh.interior_faces if interior else mesh.boundary_faces
            rule = face_quadrature(order)
            start = mesh.vertices[mesh.face_vertices[faces, 0]]
            end = mesh.vertices[mesh.face_vertices[faces, 1]]
            points = start[:, None, :] + rule.points[None, :, None] * (end - start)[:, None, :]
            weights = rule.weights[None, :] * mesh.face_lengths[faces][:, None]
            normal = mesh.face_normals[faces]
            sides = []
            for side in range(2 if interior else 1):
                elements = mesh.face_elements[faces, side]
                sides.append(
                    self._face_side(elements, normal if side == 0 else -normal, points)
                )
            self._face_cache[key] = FaceData(
                faces=faces,
                points=points,
                weights=weights,
                h=mesh.face_h[faces],
                sides=tuple(sides),
            )
        return self._face_cache[key]

    def _face_side(self, elements: np.ndarray, normals: np.ndarray, points: np.ndarray) -> FaceSide:
        ref = self.mesh.to_reference(elements, points)
        scales = self.scales[elements][:, None, None]
        values = self.basis.values(ref) * scales
        grads = physical_gradients(
            self.mesh.inverse_jacobians[elements], self.basis.gradients(ref)
        ) * scales[..., None]
        return FaceSide(elements, normals, ref, values, grads)

    def function(self, coefficients: np.ndarray | None = None) -> "DGFunction":
        if coefficients is None:
            coefficients = np.zeros(self.ndofs)
        return DGFunction(self, coefficients)


def make_space(mesh: Mesh, k: int) -> DGSpace:
    return DGSpace(mesh, k)


class DGFunction:
    def __init__(self, space: DGSpace, coefficients: np.ndarray) -> None:
        coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
        if coefficients.shape[0] != space.ndofs:
            raise ValueError(
                f"Expected {space.ndofs} coefficients for {space!r}, got {coefficients.shape[0]}"
            )
        self.space = space
        self.coefficients = coefficients

    @property
    def local_coefficients(self) -> np.ndarray:
        return self.coefficients.reshape(self.space.mesh.nelems, self.space.dofs_per_elem)

    def sample(
        self, elements: np.ndarray, ref_points: np.ndarray, points: np.ndarray
    ) -> FieldSample:
        space = self.space
        elements = np.asarray(elements)
        coeffs = self.local_coefficients[elements] * space.scales[elements][:, None]
        inv = space.mesh.inverse_jacobians[elements]
        values = np.einsum("eqn,en->eq", space.basis.values(ref_points), coeffs)
        grads = np.einsum(
            "eqnd,en->eqd", physical_gradients(inv, space.basis.gradients(ref_points)), coeffs
        )
        laps = np.einsum(
            "eqn,en->eq", physical_laplacians(inv, space.basis.hessians(ref_points)), coeffs
        )
        return FieldSample(values, grads, laps)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        elements = self.space.mesh.locate(points)
        ref = self.space.mesh.to_reference(elements, points[:, None, :])
        return self.sample(elements, ref, points[:, None, :]).values[:, 0]

    def __sub__(self, other: "DGFunction") -> "DGFunction":
        if other.space is not self.space:
            raise ValueError("Cannot subtract functions from different spaces")
        return DGFunction(self.space, self.coefficients - other.coefficients)


def l2_project(
    field: Callable[[np.ndarray], np.ndarray], space: DGSpace, order: int | None = None
) -> DGFunction:
    """Поэлементная L²-проекция ``P_k``."""
    data = space.volume_data(space.error_order if order is None else order)
    samples = field(data.points)
    moments = np.einsum("eq,eqn->en", samples * data.weights, data.values)
    return DGFunction(space, moments.reshape(-1))


def estimate_trace_inverse_constant(k: int) -> float:
    """Constant of ``||v||_e^2 <= C_inv k^2 h_K^{-1} ||v||_K^2`` on the reference triangle."""
    if k < 1:
        raise ValueError(f"Polynomial degree must be at least 1, got {k}")
    basis = reference_basis(k)
    vol = volume_quadrature(min(2 * k, MAX_ORDER))
    vol_values = basis.values(vol.points)
    mass = np.einsum("q,qi,qj->ij", vol.weights, vol_values, vol_values)
    rule = face_quadrature(min(2 * k, MAX_ORDER))
    largest = 0.0
    for r in range(3):
        start = REFERENCE_VERTICES[(r + 1) % 3]
        end = REFERENCE_VERTICES[(r + 2) % 3]
        points, weights = rule.map_to_edge(start, end)
        values = basis.values(points)
        edge_mass = np.einsum("q,qi,qj->ij", weights, values, values)
        largest = max(largest, float(linalg.eigh(edge_mass, mass, eigvals_only=True)[-1]))
    h_ref = math.sqrt(2.0)
    return largest * h_ref / k**2
