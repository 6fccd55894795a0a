import numpy as np
import pytest
import scipy.linalg as la
import scipy.optimize as opt
import scipy.sparse as sp

from ipdg_lab.core.analysis import (
    coercivity_constant,
    continuity_constant,
    data_oscillation,
    galerkin_defect,
    infsup_gamma,
    local_h4_seminorm,
    local_seminorm,
    norm_equivalence_constant,
    ritz_project,
    ritz_report,
    solve_poisson,
    solve_system,
)
from ipdg_lab.core.forms import NormKind, assemble_load, assemble_norm_matrix, assemble_sip
from ipdg_lab.core.linalg import DofLimitError
from ipdg_lab.core.mesh_builder import gen_geometric, gen_uniform
from ipdg_lab.core.problems import get_problem, layer, polybubble, sinsin
from ipdg_lab.core.space import DGSpace
from ipdg_lab.models.config import PenaltyConfig, SolverSettings
from ipdg_lab.models.functions import ExactFunction, Problem
from ipdg_lab.models.mesh import Mesh

CFG = PenaltyConfig()


def test_polynomial_solution_is_reproduced():
    u_h, report = solve_poisson(gen_uniform(2), 4, CFG, polybubble())
    assert report.l2_error < 1e-8
    assert report.dofs == u_h.space.ndofs == 8 * 15
    assert report.best_l2 < 1e-10
    assert report.data_osc < 1e-10


def test_galerkin_orthogonality():
    problem = polybubble()
    u_h, _ = solve_poisson(gen_geometric(0.7, 2), 2, CFG, problem)
    defect = galerkin_defect(problem.exact, u_h, CFG)
    b = assemble_load(problem.source, u_h.space)
    assert np.max(np.abs(defect)) <= 1e-8 * np.max(np.abs(b))


def test_sinsin_errors_are_small():
    _, report = solve_poisson(gen_uniform(4), 1, CFG, sinsin())
    assert 0 < report.l2_error < 0.1
    assert report.l2_error < report.energy_error
    assert report.grading.alpha == 0.0


def test_nonsymmetric_method_solves():
    _, report = solve_poisson(gen_uniform(4), 1, PenaltyConfig(theta=-1.0), sinsin())
    assert 0 < report.l2_error < 0.1


def test_gamma_matches_brute_force():
    mesh = gen_uniform(1)
    space = DGSpace(mesh, 1)
    A = assemble_sip(mesh, space, CFG).toarray()
    h2h = assemble_norm_matrix(NormKind.H2H, mesh, space, CFG).toarray()
    z = assemble_norm_matrix(NormKind.Z, mesh, space, CFG).toarray()
    gamma = infsup_gamma(mesh, 1, CFG)
    assert gamma > 0

    # sup over tests of v^T A w / |v|_H2h equals sqrt((Aw)^T H2h^-1 (Aw))
    S = A.T @ la.solve(h2h, A, assume_a="pos")
    smallest = la.eigh(0.5 * (S + S.T), z, eigvals_only=True)[0]
    assert gamma == pytest.approx(np.sqrt(smallest), rel=1e-8)

    W = np.random.default_rng(7).standard_normal((space.ndofs, 100_000))
    sup_norms = np.sqrt(np.einsum("is,is->s", W, S @ W))
    z_norms = np.sqrt(np.einsum("is,is->s", W, z @ W))
    assert np.min(sup_norms / z_norms) >= gamma * (1.0 - 1e-9)

    # polish the best sample; the quotient has no spurious local minima
    def quotient(w):
        return np.sqrt((w @ S @ w) / (w @ z @ w))

    start = W[:, np.argmin(sup_norms / z_norms)]
    polished = opt.minimize(quotient, start, method="BFGS", options={"gtol": 1e-10})
    assert polished.fun >= gamma * (1.0 - 1e-9)
    assert polished.fun == pytest.approx(gamma, rel=0.02)


def test_stability_constants_need_symmetric_method():
    with pytest.raises(ValueError, match="symmetric"):
        infsup_gamma(gen_uniform(2), 1, PenaltyConfig(theta=-1.0))
    with pytest.raises(ValueError, match="symmetric"):
        ritz_project(polybubble(), gen_uniform(2), 1, PenaltyConfig(theta=0.0))


def test_dense_constants_refuse_large_spaces():
    with pytest.raises(DofLimitError):
        infsup_gamma(gen_uniform(21), 1, CFG)
    with pytest.raises(DofLimitError):
        coercivity_constant(gen_uniform(21), 1, CFG)


def test_coercivity_sign_follows_the_penalty():
    mesh = gen_uniform(2)
    assert coercivity_constant(mesh, 1, CFG) > 0
    assert coercivity_constant(mesh, 1, PenaltyConfig(csigma=0.01)) < 0


def test_continuity_sampling_stays_below_exact_value():
    report = continuity_constant(gen_uniform(2), 1, CFG, samples=1000, seed=3)
    assert report.samples == 1000
    assert report.exact is not None
    assert 0 < report.sampled <= report.exact * (1.0 + 1e-9)
    again = continuity_constant(gen_uniform(2), 1, CFG, samples=1000, seed=3)
    assert again.sampled == report.sampled
    with pytest.raises(ValueError, match="at least 100"):
        continuity_constant(gen_uniform(2), 1, CFG, samples=50)


def test_norm_equivalence_constant_exceeds_one():
    assert norm_equivalence_constant(gen_geometric(0.7, 2), 1, CFG) >= 1.0


def test_ritz_projection_is_stable_in_z():
    report = ritz_report(polybubble(), gen_geometric(0.8, 3), 2, CFG)
    assert report.gamma is not None and report.gamma > 0
    assert 0 < report.stability_ratio <= report.stability_bound * (1.0 + 1e-8)
    assert report.error_l2 < report.u_z


def test_ritz_projection_reproduces_discrete_functions():
    ritz, ratio = ritz_project(polybubble(), gen_uniform(2), 4, CFG)
    assert ratio == pytest.approx(1.0, rel=1e-8)
    assert ritz.space.k == 4


def test_local_h4_seminorm_scales_with_h_squared():
    coarse = local_h4_seminorm(polybubble(), gen_uniform(2))
    fine = local_h4_seminorm(polybubble(), gen_uniform(4))
    assert coarse / fine == pytest.approx(4.0, rel=1e-10)


def test_local_seminorm_follows_the_degree():
    coarse = local_seminorm(sinsin(), gen_uniform(4), 2, order=20)
    fine = local_seminorm(sinsin(), gen_uniform(8), 2, order=20)
    assert coarse / fine == pytest.approx(8.0, rel=1e-9)
    mesh = gen_uniform(2)
    assert local_seminorm(polybubble(), mesh, 1) == local_h4_seminorm(polybubble(), mesh)
    # x(1-x)y(1-y) has vanishing fifth derivatives
    assert local_seminorm(polybubble(), mesh, 4) < 1e-14
    assert local_seminorm(polybubble(), mesh, 3) > 0


def test_error_report_uses_degree_matched_seminorm():
    mesh = gen_uniform(4)
    _, report = solve_poisson(mesh, 2, CFG, sinsin())
    assert report.local_seminorm == pytest.approx(local_seminorm(sinsin(), mesh, 2), rel=1e-12)
    assert report.local_seminorm != pytest.approx(local_h4_seminorm(sinsin(), mesh), rel=1e-3)


def test_data_oscillation():
    problem = polybubble()
    assert data_oscillation(problem.source, gen_uniform(2), 2) < 1e-12
    assert data_oscillation(problem.source, gen_uniform(2), 1) > 0


def test_problem_catalogue():
    assert get_problem("sinsin").name == "sinsin"
    assert get_problem("layer", 0.05).exact.homogeneous_dirichlet
    with pytest.raises(ValueError, match="Unknown problem"):
        get_problem("nope")
    with pytest.raises(ValueError):
        layer(0.0)


def test_problem_must_vanish_on_the_boundary():
    shifted = ExactFunction(
        "shifted",
        lambda p: 1.0 + p[..., 0] * 0.0,
        lambda p: np.zeros(p.shape),
        lambda p: np.zeros(p.shape[:-1]),
        lambda p: np.zeros((*p.shape[:-1], 2, 2)),
        homogeneous_dirichlet=True,
    )
    with pytest.raises(ValueError, match="does not vanish"):
        Problem("shifted", shifted)


def test_gamma_on_geometric_family():
    gammas = [infsup_gamma(gen_geometric(0.9, levels), 1, CFG) for levels in (4, 6, 8)]
    assert all(g > 0 for g in gammas)
    assert min(gammas) >= 0.8 * gammas[0]


def test_gamma_ignores_element_numbering():
    mesh = gen_geometric(0.7, 2)
    order = np.random.default_rng(11).permutation(mesh.nelems)
    shuffled = Mesh(mesh.vertices, mesh.triangles[order], mesh.refinement_edge[order])
    assert infsup_gamma(shuffled, 1, CFG) == pytest.approx(infsup_gamma(mesh, 1, CFG), abs=1e-10)


@pytest.mark.parametrize("problem", [sinsin(), polybubble(), layer(0.05)], ids=lambda p: p.name)
def test_problem_partials_match_the_hessian(problem):
    exact = problem.exact
    points = np.random.default_rng(9).uniform(0.05, 0.95, size=(40, 2))
    hessian = exact.hessian(points)
    assert np.allclose(exact.partial(points, 2, 0), hessian[:, 0, 0], rtol=1e-12, atol=1e-12)
    assert np.allclose(exact.partial(points, 1, 1), hessian[:, 0, 1], rtol=1e-12, atol=1e-12)
    assert np.allclose(exact.partial(points, 0, 2), hessian[:, 1, 1], rtol=1e-12, atol=1e-12)
    assert np.allclose(
        exact.derivative_norm2(points, 2), np.sum(hessian**2, axis=(1, 2)), rtol=1e-12
    )


@pytest.mark.parametrize("problem", [sinsin(), polybubble(), layer(0.05)], ids=lambda p: p.name)
def test_third_partials_match_finite_differences(problem):
    partial = problem.exact.partial
    points = np.random.default_rng(13).uniform(0.05, 0.95, size=(40, 2))
    step = 1e-5
    for a, b in [(2, 0), (1, 1), (0, 2)]:
        exact = partial(points, a + 1, b)
        shift = np.array([step, 0.0])
        approx = (partial(points + shift, a, b) - partial(points - shift, a, b)) / (2.0 * step)
        assert np.max(np.abs(exact - approx)) <= 1e-5 * max(1.0, np.max(np.abs(exact)))


@pytest.mark.parametrize("problem", [sinsin(), polybubble(), layer(0.05)], ids=lambda p: p.name)
def test_problem_gradients_match_finite_differences(problem):
    points = np.random.default_rng(5).uniform(0.05, 0.95, size=(30, 2))
    assert problem.exact.gradient_defect(points) < 1e-5


def test_indefinite_system_falls_back_to_bicgstab(caplog):
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, -1.0]]))
    b = np.array([3.0, 1.0])
    with caplog.at_level("WARNING", logger="ipdg_lab.core.analysis"):
        result = solve_system(A, b, PenaltyConfig(csigma=0.5), SolverSettings())
    assert result.method != "pcg"
    assert np.allclose(A @ result.x, b)
    assert "csigma=0.5" in caplog.text


@pytest.mark.parametrize("levels", [2, 4])
def test_ritz_projection_is_quasi_optimal_on_graded_mesh(levels):
    report = ritz_report(sinsin(), gen_geometric(0.9, levels), 1, CFG)
    assert report.gamma is not None
    assert report.stability_ratio <= report.stability_bound
    assert report.error_z <= report.quasi_optimality_bound


def test_constants_are_stable_under_refinement():
    meshes = [gen_uniform(n) for n in (2, 4, 8)]
    c0 = [coercivity_constant(mesh, 1, CFG) for mesh in meshes]
    continuity = [continuity_constant(mesh, 1, CFG, samples=100).exact for mesh in meshes]
    equivalence = [norm_equivalence_constant(mesh, 1, CFG) for mesh in meshes]
    assert all(abs(value / c0[0] - 1.0) <= 0.2 for value in c0)
    assert all(abs(value / continuity[0] - 1.0) <= 0.2 for value in continuity)
    assert max(equivalence) <= 1.5 * min(equivalence)
