import math

import numpy as np
import pytest

from ipdg_lab.core.grading import grading_report
from ipdg_lab.core.mesh_builder import (
    default_corner_cells,
    gen_geometric,
    gen_shishkin,
    gen_uniform,
    geometric_breakpoints,
    shishkin_transition,
)
from ipdg_lab.models.mesh import FaceKind, Mesh, MeshValidationError, conformity_check

SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def test_uniform_mesh_counts():
    mesh = gen_uniform(2)
    assert mesh.nvertices == 9
    assert mesh.nelems == 8
    assert mesh.nfaces == 16
    assert mesh.boundary_faces.size == 8
    assert mesh.interior_faces.size == 8
    assert mesh.total_area == pytest.approx(1.0, abs=1e-12)
    assert grading_report(mesh).alpha == 0.0


def test_uniform_mesh_rejects_bad_n():
    for n in (0, -3, 2.5):
        with pytest.raises(ValueError):
            gen_uniform(n)


def test_triangles_are_counter_clockwise_and_sized():
    mesh = gen_uniform(4)
    assert np.all(mesh.det_jacobians > 0)
    assert np.allclose(mesh.diameters, math.sqrt(2.0) / 4)
    assert np.allclose(mesh.face_h[mesh.boundary_faces], math.sqrt(2.0) / 4)


def test_face_normals_point_out_of_side_zero():
    mesh = gen_geometric(0.7, 3)
    centroids = mesh.centroids
    for face in mesh.iter_faces():
        normal = np.array(face.normal)
        assert np.linalg.norm(normal) == pytest.approx(1.0)
        midpoint = mesh.vertices[list(face.vertices)].mean(axis=0)
        assert normal @ (midpoint - centroids[face.elements[0]]) > 0
        if face.kind is FaceKind.INTERIOR:
            assert normal @ (centroids[face.elements[1]] - centroids[face.elements[0]]) > 0
            assert face.normals[1] == (-normal[0], -normal[1])


def test_boundary_vertices_of_uniform_mesh():
    mesh = gen_uniform(3)
    assert mesh.boundary_vertices.size == 12


def test_reference_map_round_trip_and_locate():
    mesh = gen_uniform(3)
    points = np.random.default_rng(1).uniform(0.0, 1.0, size=(40, 2))
    elements = mesh.locate(points)
    ref = mesh.to_reference(elements, points[:, None, :])
    assert np.all(ref >= -1e-12) and np.all(ref.sum(axis=-1) <= 1.0 + 1e-12)
    assert np.allclose(mesh.to_physical(elements, ref)[:, 0], points)
    with pytest.raises(ValueError, match="outside"):
        mesh.locate(np.array([[1.5, 0.5]]))


def test_geometric_literal_construction():
    mesh = gen_geometric(0.5, 2)
    assert np.allclose(geometric_breakpoints(0.5, 2), [0.0, 0.25, 0.5, 1.0])
    assert mesh.nvertices == 16
    assert mesh.nelems == 18
    assert mesh.total_area == pytest.approx(1.0, abs=1e-12)


def test_geometric_corner_band_matches_neighbour():
    assert default_corner_cells(0.5) == 1
    assert default_corner_cells(0.9) == 9
    points = geometric_breakpoints(0.9, 6)
    widths = np.diff(points)
    assert points.size == 9 + 7
    assert widths[8] == pytest.approx(widths[9])
    assert np.all(np.diff(widths[9:]) > 0)


def test_geometric_counts_with_and_without_corner_band():
    literal = gen_geometric(0.9, 3, corner_cells=1)
    assert geometric_breakpoints(0.9, 3, corner_cells=1).size == 3 + 2
    assert literal.nvertices == 5 * 5
    assert literal.nelems == 2 * (3 + 1) ** 2
    banded = gen_geometric(0.9, 3)
    assert banded.nvertices == (3 + 9 + 1) ** 2
    assert banded.nelems == 2 * (3 + 9) ** 2


def test_geometric_mesh_is_mildly_graded():
    mesh = gen_geometric(0.9, 20)
    report = grading_report(mesh)
    assert report.alpha <= 0.42
    assert report.mu > 0
    assert mesh.total_area == pytest.approx(1.0, abs=1e-12)


def test_grading_decreases_as_beta_approaches_one():
    alphas = [grading_report(gen_geometric(beta, 8)).alpha for beta in (0.8, 0.9, 0.95)]
    assert alphas[0] > alphas[1] > alphas[2] > 0


def test_geometric_rejects_bad_parameters():
    with pytest.raises(ValueError, match="beta"):
        gen_geometric(1.2, 4)
    with pytest.raises(ValueError, match="levels"):
        gen_geometric(0.5, 0)
    with pytest.raises(ValueError, match="corner_cells"):
        gen_geometric(0.5, 3, corner_cells=0)


def test_shishkin_clamps_transition():
    assert shishkin_transition(0.25, 4) == 0.5
    mesh = gen_shishkin(0.25, 4)
    assert mesh.nelems == 2 * 8 * 4
    assert np.allclose(np.unique(mesh.vertices[:, 0]), np.linspace(0.0, 1.0, 9))


def test_shishkin_resolves_the_layer():
    mesh = gen_shishkin(0.01, 8)
    tau = 2 * 0.01 * math.log(8)
    xs = np.unique(mesh.vertices[:, 0])
    assert xs[8] == pytest.approx(tau)
    assert xs[1] == pytest.approx(tau / 8)
    assert mesh.total_area == pytest.approx(1.0, abs=1e-12)


def test_shishkin_rejects_bad_parameters():
    with pytest.raises(ValueError, match="epsilon"):
        gen_shishkin(0.3, 4)
    with pytest.raises(ValueError, match="epsilon"):
        gen_shishkin(0.0, 4)
    with pytest.raises(ValueError):
        gen_shishkin(0.01, 1)


def test_clockwise_triangle_is_rejected():
    with pytest.raises(MeshValidationError, match="counter-clockwise"):
        Mesh(SQUARE, [[0, 2, 1], [0, 2, 3]])


def test_hanging_node_is_rejected():
    vertices = SQUARE + [[0.5, 0.5]]
    triangles = [[0, 1, 2], [0, 4, 3], [4, 2, 3]]
    with pytest.raises(MeshValidationError, match="face"):
        conformity_check(vertices, triangles)


def test_partial_cover_is_rejected():
    with pytest.raises(MeshValidationError):
        conformity_check(SQUARE, [[0, 1, 2]])


def test_overlapping_triangles_are_rejected():
    vertices = SQUARE + [[0.5, 0.5]]
    triangles = [[0, 1, 2], [0, 2, 3], [0, 4, 3]]
    with pytest.raises(MeshValidationError):
        conformity_check(vertices, triangles)


def test_anisotropic_mesh_is_accepted():
    xs = np.array([0.0, 0.5, 1.0])
    ys = np.array([0.0, 0.01, 1.0])
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    triangles = [[0, 3, 4], [0, 4, 1], [1, 4, 5], [1, 5, 2], [3, 6, 7], [3, 7, 4], [4, 7, 8], [4, 8, 5]]
    mesh = conformity_check(vertices, triangles)
    assert mesh.nelems == 8
    assert grading_report(mesh).mu < 0.05
