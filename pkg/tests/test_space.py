import numpy as np
import pytest

from ipdg_lab.core.forms import NormKind, assemble_norm_matrix
from ipdg_lab.core.mesh_builder import gen_geometric, gen_shishkin, gen_uniform
from ipdg_lab.core.quadrature import face_quadrature, volume_quadrature
from ipdg_lab.core.space import (
    MAX_DEGREE,
    REFERENCE_VERTICES,
    DGFunction,
    DGSpace,
    estimate_trace_inverse_constant,
    l2_project,
    reference_basis,
)
from ipdg_lab.models.config import PenaltyConfig
from ipdg_lab.models.functions import ExactFunction, FieldDifference


def _quadratic() -> ExactFunction:
    def value(p):
        x, y = p[..., 0], p[..., 1]
        return 1.0 + 2.0 * x - 3.0 * y + x * y + 0.5 * y * y

    def gradient(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([2.0 + y, -3.0 + x + y], axis=-1)

    def laplacian(p):
        return np.ones(p.shape[:-1])

    def hessian(p):
        block = np.array([[0.0, 1.0], [1.0, 1.0]])
        return np.broadcast_to(block, (*p.shape[:-1], 2, 2))

    return ExactFunction("quadratic", value, gradient, laplacian, hessian)


@pytest.mark.parametrize("k", range(1, MAX_DEGREE + 1))
def test_reference_basis_is_orthonormal(k):
    basis = reference_basis(k)
    rule = volume_quadrature(2 * k)
    values = basis.values(rule.points)
    mass = np.einsum("q,qi,qj->ij", rule.weights, values, values)
    assert basis.size == (k + 1) * (k + 2) // 2
    assert np.allclose(mass, np.eye(basis.size), atol=1e-8)


def test_first_basis_function_is_constant():
    values = reference_basis(3).values(volume_quadrature(4).points)
    assert np.allclose(values[:, 0], np.sqrt(2.0))


def test_basis_is_hierarchical():
    rule = volume_quadrature(6)
    low = reference_basis(2).values(rule.points)
    high = reference_basis(3).values(rule.points)
    assert np.allclose(high[:, : low.shape[1]], low, atol=1e-12)


def test_physical_mass_matrix_is_identity():
    mesh = gen_geometric(0.5, 3)
    space = DGSpace(mesh, 2)
    mass = assemble_norm_matrix(NormKind.L2, mesh, space, PenaltyConfig())
    assert np.allclose(mass.toarray(), np.eye(space.ndofs), atol=1e-11)


@pytest.mark.parametrize("k", [0, 9, 1.5, True])
def test_space_rejects_bad_degrees(k):
    with pytest.raises(ValueError):
        DGSpace(gen_uniform(1), k)


def test_dof_layout_is_element_major():
    space = DGSpace(gen_uniform(2), 1)
    assert space.ndofs == 24
    assert space.element_dofs(np.array([0, 2])).tolist() == [[0, 1, 2], [6, 7, 8]]


def test_function_rejects_wrong_length():
    space = DGSpace(gen_uniform(1), 1)
    with pytest.raises(ValueError, match="Expected 6 coefficients"):
        DGFunction(space, np.zeros(5))


def test_projection_reproduces_polynomials():
    exact = _quadratic()
    space = DGSpace(gen_uniform(3), 2)
    projected = l2_project(exact, space)

    points = np.random.default_rng(0).uniform(0.01, 0.99, size=(50, 2))
    assert np.allclose(projected(points), exact(points), atol=1e-10)

    data = space.volume_data(space.error_order)
    elements = np.arange(space.mesh.nelems)
    ref = np.broadcast_to(data.rule.points, data.points.shape)
    defect = FieldDifference(exact, projected).sample(elements, ref, data.points)
    assert np.max(np.abs(defect.gradients)) < 1e-9
    assert np.max(np.abs(defect.laplacians)) < 1e-8


def test_projection_is_l2_orthogonal():
    exact = ExactFunction(
        "wave",
        lambda p: np.sin(3.0 * p[..., 0]) * np.cos(2.0 * p[..., 1]),
        lambda p: np.zeros_like(p),
        lambda p: np.zeros(p.shape[:-1]),
        lambda p: np.zeros((*p.shape[:-1], 2, 2)),
    )
    space = DGSpace(gen_uniform(2), 1)
    projected = l2_project(exact, space)
    data = space.volume_data(space.error_order)
    residual = exact(data.points) - np.einsum("en,eqn->eq", projected.local_coefficients, data.values)
    moments = np.einsum("eq,eq,eqn->en", data.weights, residual, data.values)
    assert np.max(np.abs(moments)) < 1e-13


@pytest.mark.parametrize("k", [1, 2, 4])
def test_trace_inverse_constant_bounds_random_polynomials(k):
    cinv = estimate_trace_inverse_constant(k)
    basis = reference_basis(k)
    rule = face_quadrature(2 * k)
    bound = cinv * k**2 / np.sqrt(2.0)
    rng = np.random.default_rng(k)
    for coeffs in rng.standard_normal((200, basis.size)):
        volume_sq = coeffs @ coeffs
        for r in range(3):
            points, weights = rule.map_to_edge(
                REFERENCE_VERTICES[(r + 1) % 3], REFERENCE_VERTICES[(r + 2) % 3]
            )
            edge_sq = weights @ (basis.values(points) @ coeffs) ** 2
            assert edge_sq <= bound * volume_sq * (1.0 + 1e-9)


@pytest.mark.parametrize("k", [1, 3])
@pytest.mark.parametrize(
    "mesh", [gen_geometric(0.8, 3), gen_shishkin(0.01, 8)], ids=["geometric", "shishkin"]
)
def test_trace_inverse_estimate_on_mesh_elements(mesh, k):
    # |v|_e^2 <= C_inv k^2 / sqrt(2) * (|e| / |e_ref|) / |det J| * |v|_K^2, sharp on some edge
    cinv = estimate_trace_inverse_constant(k)
    space = DGSpace(mesh, k)
    ends = np.roll(REFERENCE_VERTICES, -1, axis=0) - np.roll(REFERENCE_VERTICES, 1, axis=0)
    edge_ref = np.linalg.norm(ends, axis=1)
    ratios = []
    for interior in (True, False):
        data = space.face_data(interior, 2 * k)
        for index, side in enumerate(data.sides):
            edge_mass = np.einsum("fq,fqi,fqj->fij", data.weights, side.values, side.values)
            largest = np.linalg.eigvalsh(edge_mass)[:, -1]
            local = mesh.face_local_edges[data.faces, index]
            bound = (
                cinv * k**2 / np.sqrt(2.0) * mesh.face_lengths[data.faces]
                / (edge_ref[local] * np.abs(mesh.det_jacobians[side.elements]))
            )
            ratios.append(largest / bound)
    ratios = np.concatenate(ratios)
    assert np.all(ratios <= 1.0 + 1e-8)
    assert ratios.max() == pytest.approx(1.0, rel=1e-8)


def test_monomials_are_reproduced_by_their_projection():
    basis = reference_basis(3)
    rule = volume_quadrature(6)
    for a, b in [(0, 0), (1, 2), (3, 0), (0, 3)]:
        coeffs = basis.project_monomial(a, b, rule)
        target = rule.points[:, 0] ** a * rule.points[:, 1] ** b
        assert np.allclose(basis.values(rule.points) @ coeffs, target, atol=1e-12)
