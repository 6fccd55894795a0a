"""Конформные треугольные сетки единичного квадрата и топология граней."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

AREA_TOL = 1e-12
BOUNDARY_TOL = 1e-12

# Local edge r is the edge opposite local vertex r.
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]], dtype=np.int64)


class MeshValidationError(ValueError):
    """Некорректная или неконформная сетка."""


class FaceKind(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


@dataclass(frozen=True, slots=True)
class Face:
    """A single edge of the mesh seen from its neighbouring triangles."""

    vertices: tuple[int, int]
    kind: FaceKind
    elements: tuple[int, ...]
    normal: tuple[float, float]
    length: float
    h: float

    @property
    def normals(self) -> tuple[tuple[float, float], ...]:
        """Outward unit normal per side, in the order of ``elements``."""
        if self.kind is FaceKind.BOUNDARY:
            return (self.normal,)
        nx, ny = self.normal
        return (self.normal, (-nx, -ny))


@dataclass(frozen=True, slots=True)
class GradingReport:
    """Mesh quantities entering the stability theory."""

    alpha: float
    mu: float
    cqu: float
    face_count: int
    elem_count: int
    h_min: float
    h_max: float

    def summary_lines(self) -> list[str]:
        return [
            f"elements: {self.elem_count}",
            f"faces: {self.face_count}",
            f"h_min: {self.h_min:.6g}",
            f"h_max: {self.h_max:.6g}",
            f"alpha: {self.alpha:.6g}",
            f"mu: {self.mu:.6g}",
            f"cqu: {self.cqu:.6g}",
        ]


def _on_domain_boundary(points: np.ndarray) -> np.ndarray:
    x, y = points[..., 0], points[..., 1]
    return (
        (np.abs(x) < BOUNDARY_TOL)
        | (np.abs(x - 1.0) < BOUNDARY_TOL)
        | (np.abs(y) < BOUNDARY_TOL)
        | (np.abs(y - 1.0) < BOUNDARY_TOL)
    )


def _same_domain_side(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """True where both endpoints lie on one common side of the unit square."""
    result = np.zeros(a.shape[0], dtype=bool)
    for axis in (0, 1):
        for value in (0.0, 1.0):
            result |= (np.abs(a[:, axis] - value) < BOUNDARY_TOL) & (
                np.abs(b[:, axis] - value) < BOUNDARY_TOL
            )
    return result


def longest_edge_tags(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Refinement edge per triangle: the longest edge, ties to the lowest opposite vertex."""
    pts = vertices[triangles]
    lengths = np.stack(
        [
            np.linalg.norm(pts[:, b] - pts[:, a], axis=1)
            for a, b in LOCAL_EDGES
        ],
        axis=1,
    )
    longest = lengths.max(axis=1, keepdims=True)
    candidates = lengths >= longest * (1.0 - 1e-12)
    sentinel = np.iinfo(np.int64).max
    return np.where(candidates, triangles, sentinel).argmin(axis=1).astype(np.int64)


class Mesh:
    """Immutable conforming triangulation of the unit square.

    Vertices are stored as an ``(V, 2)`` array, triangles as counter-clockwise
    vertex triples ``(E, 3)``. Faces are the unique edges; an interior face
    lists both neighbours with side 0 being the lower element index, and its
    stored normal points out of side 0.
    """

    def __init__(
        self,
        vertices: Sequence[Sequence[float]] | np.ndarray,
        triangles: Sequence[Sequence[int]] | np.ndarray,
        refinement_edge: Sequence[int] | np.ndarray | None = None,
        *,
        validate: bool = True,
    ) -> None:
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 2)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size == 0:
            raise MeshValidationError("Mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshValidationError(
                f"Triangle vertex indices must lie in [0, {len(vertices) - 1}]"
            )

        self.vertices = vertices
        self.triangles = triangles

        p0 = vertices[triangles[:, 0]]
        p1 = vertices[triangles[:, 1]]
        p2 = vertices[triangles[:, 2]]
        jac = np.stack([p1 - p0, p2 - p0], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if validate:
            bad = np.flatnonzero(det <= 0.0)
            if bad.size:
                idx = int(bad[0])
                raise MeshValidationError(
                    f"Triangle {idx} {triangles[idx].tolist()} is not counter-clockwise "
                    f"(signed area {det[idx] / 2:.3e})"
                )
        self.origins = p0
        self.jacobians = jac
        self.det_jacobians = det
        self.inverse_jacobians = np.linalg.inv(jac)
        self.areas = 0.5 * det

        pts = vertices[triangles]
        self.edge_lengths = np.stack(
            [np.linalg.norm(pts[:, b] - pts[:, a], axis=1) for a, b in LOCAL_EDGES],
            axis=1,
        )
        self.diameters = self.edge_lengths.max(axis=1)
        self.inradii = 2.0 * self.areas / self.edge_lengths.sum(axis=1)

        self._build_faces(validate)

        if refinement_edge is None:
            refinement_edge = longest_edge_tags(vertices, triangles)
        refinement_edge = np.array(refinement_edge, dtype=np.int64).reshape(-1)
        if refinement_edge.shape[0] != triangles.shape[0] or np.any(
            (refinement_edge < 0) | (refinement_edge > 2)
        ):
            raise MeshValidationError(
                "refinement_edge must hold one local edge index in {0, 1, 2} per triangle"
            )
        self.refinement_edge = refinement_edge
        self.boundary_vertex_mask = _on_domain_boundary(vertices)

        if validate:
            total = float(self.areas.sum())
            if abs(total - 1.0) > AREA_TOL:
                raise MeshValidationError(
                    f"Triangles do not tile the unit square: total area {total!r}"
                )

        for array in (
            self.vertices,
            self.triangles,
            self.origins,
            self.jacobians,
            self.det_jacobians,
            self.inverse_jacobians,
            self.areas,
            self.edge_lengths,
            self.diameters,
            self.inradii,
            self.refinement_edge,
            self.boundary_vertex_mask,
            self.face_vertices,
            self.face_elements,
            self.face_local_edges,
            self.face_normals,
            self.face_lengths,
            self.face_h,
            self.boundary_face_mask,
        ):
            array.setflags(write=False)

    def _build_faces(self, validate: bool) -> None:
        triangles = self.triangles
        oriented = triangles[:, LOCAL_EDGES]  # (E, 3, 2), CCW orientation
        keys = np.sort(oriented, axis=2).reshape(-1, 2)
        _, inverse, counts = np.unique(
            keys, axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.reshape(-1)
        if validate and np.any(counts > 2):
            face = int(np.flatnonzero(counts > 2)[0])
            occ = np.flatnonzero(inverse == face)[0]
            raise MeshValidationError(
                f"Face {keys[occ].tolist()} is shared by more than two triangles"
            )

        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        first = order[starts]
        interior = counts == 2
        second = np.full(counts.shape, -1, dtype=np.int64)
        second[interior] = order[starts[interior] + 1]

        elem0, edge0 = np.divmod(first, 3)
        elem1 = np.where(second >= 0, second // 3, -1)
        edge1 = np.where(second >= 0, second % 3, -1)

        face_vertices = oriented[elem0, edge0]
        a = self.vertices[face_vertices[:, 0]]
        b = self.vertices[face_vertices[:, 1]]
        tangent = b - a
        lengths = np.linalg.norm(tangent, axis=1)
        normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / lengths[:, None]

        boundary = ~interior
        if validate:
            # neighbours across a conforming edge traverse it in opposite directions
            other = oriented[elem1[interior], edge1[interior]]
            folded = np.flatnonzero(np.any(other != face_vertices[interior][:, ::-1], axis=1))
            if folded.size:
                face = int(np.flatnonzero(interior)[folded[0]])
                raise MeshValidationError(
                    f"Overlapping triangles {int(elem0[face])} and {int(elem1[face])} "
                    f"on face {face_vertices[face].tolist()}"
                )
            stray = np.flatnonzero(boundary & ~_same_domain_side(a, b))
            if stray.size:
                face = int(stray[0])
                raise MeshValidationError(
                    f"Non-conforming face {face_vertices[face].tolist()}: it has a single "
                    "neighbour but does not lie on the boundary of the unit square"
                )

        face_h = self.diameters[elem0].copy()
        face_h[interior] = 0.5 * (
            self.diameters[elem0[interior]] + self.diameters[elem1[interior]]
        )

        self.face_vertices = face_vertices
        self.face_elements = np.stack([elem0, elem1], axis=1)
        self.face_local_edges = np.stack([edge0, edge1], axis=1)
        self.face_normals = normals
        self.face_lengths = lengths
        self.face_h = face_h
        self.boundary_face_mask = boundary
        self.element_faces = np.empty((triangles.shape[0], 3), dtype=np.int64)
        self.element_faces.reshape(-1)[:] = inverse
        self.element_faces.setflags(write=False)

    @property
    def nvertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def nelems(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def nfaces(self) -> int:
        return int(self.face_vertices.shape[0])

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_face_mask)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_face_mask)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_vertex_mask)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def face(self, index: int) -> Face:
        elem0, elem1 = (int(e) for e in self.face_elements[index])
        boundary = bool(self.boundary_face_mask[index])
        nx, ny = (float(v) for v in self.face_normals[index])
        return Face(
            vertices=(int(self.face_vertices[index, 0]), int(self.face_vertices[index, 1])),
            kind=FaceKind.BOUNDARY if boundary else FaceKind.INTERIOR,
            elements=(elem0,) if boundary else (elem0, elem1),
            normal=(nx, ny),
            length=float(self.face_lengths[index]),
            h=float(self.face_h[index]),
        )

    @cached_property
    def faces(self) -> tuple[Face, ...]:
        return tuple(self.face(i) for i in range(self.nfaces))

    def iter_faces(self) -> Iterator[Face]:
        return iter(self.faces)

    def to_physical(self, elements: np.ndarray, ref_points: np.ndarray) -> np.ndarray:
        """Affine map of reference points ``(..., Q, 2)`` onto the given elements."""
        elements = np.asarray(elements)
        jac = self.jacobians[elements]
        return self.origins[elements][..., None, :] + np.einsum(
            "...ij,...qj->...qi", jac, ref_points
        )

    def to_reference(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Inverse affine map of physical points ``(..., Q, 2)`` on the given elements."""
        elements = np.asarray(elements)
        inv = self.inverse_jacobians[elements]
        shifted = points - self.origins[elements][..., None, :]
        return np.einsum("...ij,...qj->...qi", inv, shifted)

    def locate(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Index of a triangle containing each point (closed triangles)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ref = np.einsum(
            "eij,epj->pei",
            self.inverse_jacobians,
            points[None, :, :] - self.origins[:, None, :],
        )
        inside = (
            (ref[..., 0] >= -tol)
            & (ref[..., 1] >= -tol)
            & (ref[..., 0] + ref[..., 1] <= 1.0 + tol)
        )
        found = inside.any(axis=1)
        if not np.all(found):
            missing = points[np.flatnonzero(~found)[0]].tolist()
            raise ValueError(f"Point {missing} lies outside the mesh")
        return inside.argmax(axis=1)

    def __repr__(self) -> str:
        return (
            f"Mesh(vertices={self.nvertices}, triangles={self.nelems}, faces={self.nfaces})"
        )


def conformity_check(
    vertices: Sequence[Sequence[float]] | np.ndarray,
    triangles: Sequence[Sequence[int]] | np.ndarray,
    refinement_edge: Sequence[int] | np.ndarray | None = None,
) -> Mesh:
    """Build a validated mesh, raising :class:`MeshValidationError` on the first defect.

    A triangulation passes when every triangle is counter-clockwise, every
    edge has at most two neighbours traversing it in opposite directions,
    single-neighbour edges lie on the boundary of the unit square and the
    areas add up to one.
    """
    return Mesh(vertices, triangles, refinement_edge, validate=True)
