"""Poisson solves, Ritz projection and the discrete stability constants."""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..models.config import PenaltyConfig, SolverSettings
from ..models.functions import ExactFunction, FieldDifference, Problem
from ..models.mesh import Mesh
from ..models.report import ContinuityReport, ErrorReport, RitzReport
from .forms import (
    NormKind,
    assemble_load,
    assemble_norm_matrix,
    assemble_ritz_rhs,
    assemble_sip,
    norm_by_quadrature,
)
from .grading import grading_report
from .linalg import (
    MAX_DENSE_DOFS,
    DofLimitError,
    IndefiniteMatrixError,
    SolveResult,
    generalized_sym_eig,
    largest_gsv,
    smallest_gsv,
    solve_general,
    solve_spd,
)
from .quadrature import MAX_ORDER, volume_quadrature
from .space import DGFunction, DGSpace, l2_project, make_space

logger = logging.getLogger(__name__)

HESSIAN_ORDER = 10


def _require_symmetric(cfg: PenaltyConfig, what: str) -> None:
    if not cfg.symmetric:
        raise ValueError(f"{what} needs the symmetric method (theta = 1), got theta={cfg.theta}")


def _require_dense(space: DGSpace, what: str) -> None:
    if space.ndofs > MAX_DENSE_DOFS:
        raise DofLimitError(
            f"{what} uses dense linear algebra limited to {MAX_DENSE_DOFS} DOFs; "
            f"this space has {space.ndofs}"
        )


def solve_system(
    A: sp.csr_matrix, b: np.ndarray, cfg: PenaltyConfig, settings: SolverSettings
) -> SolveResult:
    options = dict(
        tol=settings.tol, maxit=settings.iteration_cap(b.shape[0]), accept_tol=settings.accept_tol
    )
    if not cfg.symmetric:
        return solve_general(A, b, **options)
    try:
        return solve_spd(A, b, **options)
    except IndefiniteMatrixError as exc:
        # low penalties lose coercivity; the error columns record the damage
        logger.warning(
            "SIP matrix is not positive definite at csigma=%s (%s); retrying with BiCGSTAB",
            cfg.csigma,
            exc,
        )
        return solve_general(A, b, **options)


def local_seminorm(
    u: ExactFunction | Problem, mesh: Mesh, k: int = 1, order: int | None = None
) -> float:
    """``(Σ_K h_K^{2(k+1)} ||D^{k+1}u||²_{L²(K)})^{1/2}``.

    The local quantity matched to degree k; for k = 1 it is the h⁴ Hessian term.
    """
    exact = u.exact if isinstance(u, Problem) else u
    order = min(max(HESSIAN_ORDER, 2 * k + 6), MAX_ORDER) if order is None else order
    rule = volume_quadrature(order)
    points = mesh.to_physical(np.arange(mesh.nelems), rule.points)
    local = np.einsum("q,eq->e", rule.weights, exact.derivative_norm2(points, k + 1))
    local *= np.abs(mesh.det_jacobians)
    return float(np.sqrt(np.sum(mesh.diameters ** (2 * (k + 1)) * local)))


def local_h4_seminorm(u: ExactFunction | Problem, mesh: Mesh) -> float:
    """``(Σ_K h_K⁴ ||D²u||²_{L²(K)})^{1/2}`` with the Frobenius norm of the Hessian."""
    return local_seminorm(u, mesh, 1)


def data_oscillation(
    f: Callable[[np.ndarray], np.ndarray], mesh: Mesh, k: int, space: DGSpace | None = None
) -> float:
    """``||h²(f - P_k f)||`` with ``P_k`` the elementwise L² projection."""
    space = make_space(mesh, k) if space is None else space
    data = space.volume_data(space.error_order)
    projected = np.einsum("en,eqn->eq", l2_project(f, space).local_coefficients, data.values)
    defect = f(data.points) - projected
    local = np.sum(data.weights * defect**2, axis=1)
    return float(np.sqrt(np.sum(mesh.diameters**4 * local)))


def best_approximation(u: ExactFunction, space: DGSpace) -> DGFunction:
    """The elementwise L² projection ``P_k u``."""
    return l2_project(u, space)


def error_report(
    u_h: DGFunction, problem: Problem, cfg: PenaltyConfig
) -> ErrorReport:
    space = u_h.space
    mesh = space.mesh
    error = FieldDifference(problem.exact, u_h)
    best = FieldDifference(problem.exact, best_approximation(problem.exact, space))
    return ErrorReport(
        l2_error=norm_by_quadrature(NormKind.L2, error, space, cfg),
        z_error=norm_by_quadrature(NormKind.Z, error, space, cfg),
        energy_error=norm_by_quadrature(NormKind.ENERGY, error, space, cfg),
        h2h_error=norm_by_quadrature(NormKind.H2H, error, space, cfg),
        local_seminorm=local_seminorm(problem.exact, mesh, space.k),
        best_l2=norm_by_quadrature(NormKind.L2, best, space, cfg),
        data_osc=data_oscillation(problem.source, mesh, space.k, space),
        dofs=space.ndofs,
        grading=grading_report(mesh),
    )


def solve_poisson(
    mesh: Mesh,
    k: int,
    cfg: PenaltyConfig,
    problem: Problem,
    settings: SolverSettings | None = None,
) -> tuple[DGFunction, ErrorReport]:
    """Solve ``A_h(u_h, v_h) = (f, v_h)`` and measure the error in every norm."""
    settings = SolverSettings() if settings is None else settings
    space = make_space(mesh, k)
    A = assemble_sip(mesh, space, cfg)
    b = assemble_load(problem.source, space)
    result = solve_system(A, b, cfg, settings)
    logger.info(
        "Solved %s: k=%s, %s dofs, %s (%s iterations, residual %.2e)",
        problem.name,
        k,
        space.ndofs,
        result.method,
        result.iterations,
        result.residual,
    )
    u_h = DGFunction(space, result.x)
    return u_h, error_report(u_h, problem, cfg)


def galerkin_defect(u: ExactFunction, u_h: DGFunction, cfg: PenaltyConfig) -> np.ndarray:
    """``A_h(u - u_h, φ_i)`` for every basis function."""
    space = u_h.space
    A = assemble_sip(space.mesh, space, cfg)
    return assemble_ritz_rhs(u, space, cfg) - A @ u_h.coefficients


def ritz_project(
    u: Problem | ExactFunction,
    mesh: Mesh,
    k: int,
    cfg: PenaltyConfig,
    settings: SolverSettings | None = None,
) -> tuple[DGFunction, float]:
    """Ritz projection ``A_h(Ru, v_h) = A_h(u, v_h)`` and the ratio ``||Ru||_Z / ||u||_Z``."""
    _require_symmetric(cfg, "The Ritz projection")
    exact = u.exact if isinstance(u, Problem) else u
    settings = SolverSettings() if settings is None else settings
    space = make_space(mesh, k)
    A = assemble_sip(mesh, space, cfg)
    result = solve_system(A, assemble_ritz_rhs(exact, space, cfg), cfg, settings)
    ritz = DGFunction(space, result.x)
    u_z = norm_by_quadrature(NormKind.Z, exact, space, cfg)
    ritz_z = norm_by_quadrature(NormKind.Z, ritz, space, cfg)
    ratio = ritz_z / u_z if u_z > 0 else 0.0
    logger.info("Ritz projection of %s: |Ru|_Z/|u|_Z = %.6g", exact.name, ratio)
    return ritz, ratio


def ritz_report(
    u: Problem | ExactFunction,
    mesh: Mesh,
    k: int,
    cfg: PenaltyConfig,
    settings: SolverSettings | None = None,
    with_gamma: bool = True,
) -> RitzReport:
    """Ritz stability and quasi-optimality against ``P_k u``, with γ when affordable."""
    exact = u.exact if isinstance(u, Problem) else u
    ritz, _ = ritz_project(exact, mesh, k, cfg, settings)
    space = ritz.space
    gamma = None
    if with_gamma:
        if space.ndofs <= MAX_DENSE_DOFS:
            gamma = infsup_gamma(mesh, k, cfg)
        else:
            logger.warning("Skipping gamma: %s DOFs exceed %s", space.ndofs, MAX_DENSE_DOFS)
    best = FieldDifference(exact, best_approximation(exact, space))
    return RitzReport(
        u_z=norm_by_quadrature(NormKind.Z, exact, space, cfg),
        ritz_z=norm_by_quadrature(NormKind.Z, ritz, space, cfg),
        error_z=norm_by_quadrature(NormKind.Z, FieldDifference(exact, ritz), space, cfg),
        best_z=norm_by_quadrature(NormKind.Z, best, space, cfg),
        error_l2=norm_by_quadrature(NormKind.L2, FieldDifference(exact, ritz), space, cfg),
        gamma=gamma,
    )


def _dense_setup(mesh: Mesh, k: int, cfg: PenaltyConfig, what: str) -> tuple[DGSpace, sp.csr_matrix]:
    _require_symmetric(cfg, what)
    space = make_space(mesh, k)
    _require_dense(space, what)
    return space, assemble_sip(mesh, space, cfg)


def infsup_gamma(mesh: Mesh, k: int, cfg: PenaltyConfig) -> float:
    """Discrete inf-sup constant ``inf_w sup_v A_h(w, v) / (|||v|||_{2,h} ||w||_Z)``."""
    space, A = _dense_setup(mesh, k, cfg, "The inf-sup constant")
    h2h = assemble_norm_matrix(NormKind.H2H, mesh, space, cfg)
    z = assemble_norm_matrix(NormKind.Z, mesh, space, cfg)
    gamma = smallest_gsv(A, h2h, z).value
    logger.info("Inf-sup constant: gamma=%.6g (%s dofs)", gamma, space.ndofs)
    return gamma


def coercivity_constant(mesh: Mesh, k: int, cfg: PenaltyConfig) -> float:
    """Smallest ``λ`` with ``A x = λ M_energy x``; negative when the penalty is too weak."""
    space, A = _dense_setup(mesh, k, cfg, "The coercivity constant")
    energy = assemble_norm_matrix(NormKind.ENERGY, mesh, space, cfg)
    values, _ = generalized_sym_eig(A, energy)
    c0 = float(values[0])
    if c0 <= 0:
        logger.warning("Coercivity lost: c0=%.4g at csigma=%s", c0, cfg.csigma)
    return c0


def continuity_constant(
    mesh: Mesh,
    k: int,
    cfg: PenaltyConfig,
    samples: int = 1000,
    seed: int = 0,
) -> ContinuityReport:
    """Largest ``|A_h(w, v)| / (|||w|||_{2,h} ||v||_Z)`` over random pairs, and its supremum."""
    if samples < 100:
        raise ValueError(f"Continuity sampling needs at least 100 pairs, got {samples}")
    _require_symmetric(cfg, "The continuity constant")
    space = make_space(mesh, k)
    A = assemble_sip(mesh, space, cfg)
    h2h = assemble_norm_matrix(NormKind.H2H, mesh, space, cfg)
    z = assemble_norm_matrix(NormKind.Z, mesh, space, cfg)

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((space.ndofs, samples))
    V = rng.standard_normal((space.ndofs, samples))
    w_norm = np.sqrt(np.einsum("is,is->s", W, h2h @ W))
    v_norm = np.sqrt(np.einsum("is,is->s", V, z @ V))
    keep = (w_norm > 0) & (v_norm > 0)
    ratios = np.abs(np.einsum("is,is->s", V, A @ W))[keep] / (w_norm * v_norm)[keep]
    sampled = float(ratios.max())

    exact = None
    if space.ndofs <= MAX_DENSE_DOFS:
        exact = largest_gsv(A, z, h2h).value
    else:
        logger.warning("Exact continuity constant skipped: %s DOFs", space.ndofs)
    return ContinuityReport(sampled=sampled, exact=exact, samples=int(keep.sum()))


def norm_equivalence_constant(mesh: Mesh, k: int, cfg: PenaltyConfig) -> float:
    """``max ||w_h||_Z / ||w_h||_{L²}`` over the discrete space."""
    space = make_space(mesh, k)
    _require_dense(space, "The norm equivalence constant")
    z = assemble_norm_matrix(NormKind.Z, mesh, space, cfg)
    l2 = assemble_norm_matrix(NormKind.L2, mesh, space, cfg)
    values, _ = generalized_sym_eig(z, l2)
    return float(np.sqrt(values[-1]))
