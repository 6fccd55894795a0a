"""Desk-scale linear algebra: Krylov solves, dense symmetric eigenproblems and
generalised singular values in weighted norms."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

MAX_DENSE_DOFS = 2500
DENSE_LU_LIMIT = 2000
SYMMETRY_TOL = 1e-12
_MAX_RESTARTS = 5

Matrix = np.ndarray | sp.spmatrix | sp.sparray


class LinearSolverError(RuntimeError):
    """Base class for numerical failures of the linear algebra layer."""


class ConvergenceError(LinearSolverError):
    """Iteration stopped before reaching the requested residual."""

    def __init__(self, message: str, residual: float, iterations: int, x: np.ndarray) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.x = x


class IndefiniteMatrixError(LinearSolverError):
    """Conjugate gradients met a direction of non-positive curvature."""


class NormMatrixError(LinearSolverError):
    """A norm matrix is not symmetric positive definite."""


class DofLimitError(ValueError):
    """Dense spectral computation requested above the supported size."""


@dataclass(frozen=True, slots=True)
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int
    method: str


@dataclass(frozen=True, slots=True)
class SingularValueResult:
    """A generalised singular value with its right (trial) direction.

    ``direction`` holds coefficients normalised to unit length in the right norm.
    """

    value: float
    direction: np.ndarray


def _relative_residual(A: Matrix, x: np.ndarray, b: np.ndarray) -> float:
    bnorm = np.linalg.norm(b)
    return float(np.linalg.norm(b - A @ x) / bnorm) if bnorm > 0 else float(np.linalg.norm(A @ x))


def _check_system(A: Matrix, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"Matrix of size {A.shape[0]} does not match vector of length {b.shape[0]}")
    return b


def _finish(
    x: np.ndarray, A: Matrix, b: np.ndarray, iterations: int, method: str, tol: float, accept_tol: float
) -> SolveResult:
    residual = _relative_residual(A, x, b)
    if residual > accept_tol:
        raise ConvergenceError(
            f"{method} stopped after {iterations} iterations with relative residual "
            f"{residual:.3e} > {accept_tol:.1e}",
            residual,
            iterations,
            x,
        )
    if residual > tol:
        logger.warning(
            "%s reached relative residual %.3e (target %.1e) after %s iterations",
            method,
            residual,
            tol,
            iterations,
        )
    else:
        logger.debug("%s converged: residual %.3e in %s iterations", method, residual, iterations)
    return SolveResult(x=x, residual=residual, iterations=iterations, method=method)


def solve_spd(
    A: Matrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
    accept_tol: float | None = None,
) -> SolveResult:
    """Jacobi-preconditioned conjugate gradients.

    The run succeeds when the true relative residual ``||b - Ax|| / ||b||``
    is at most ``tol``; a stalled run is still returned, with a warning, when
    it reached ``accept_tol``.
    """
    b = _check_system(A, b)
    accept_tol = tol if accept_tol is None else max(tol, accept_tol)
    n = b.shape[0]
    cap = maxit if maxit is not None else max(1000, 10 * n)
    x = np.zeros(n)
    if not np.any(b):
        return SolveResult(x=x, residual=0.0, iterations=0, method="pcg")

    diag = np.asarray(A.diagonal(), dtype=np.float64)
    if np.any(diag <= 0):
        row = int(np.flatnonzero(diag <= 0)[0])
        raise IndefiniteMatrixError(f"Non-positive diagonal entry {diag[row]:.3e} in row {row}")
    inv_diag = 1.0 / diag
    bnorm = np.linalg.norm(b)

    iterations = 0
    for restart in range(_MAX_RESTARTS + 1):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * bnorm:
            break
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        while iterations < cap:
            iterations += 1
            Ap = A @ p
            curvature = float(p @ Ap)
            if curvature <= 0.0:
                raise IndefiniteMatrixError(
                    f"Negative curvature p·Ap = {curvature:.3e} at CG iteration {iterations}; "
                    "the matrix is not positive definite (penalty too small?)"
                )
            step = rz / curvature
            x += step * p
            r -= step * Ap
            if np.linalg.norm(r) <= tol * bnorm:
                break
            z = inv_diag * r
            rz_next = float(r @ z)
            p = z + (rz_next / rz) * p
            rz = rz_next
        if iterations >= cap:
            break
        logger.debug("CG restart %s after %s iterations", restart + 1, iterations)
    return _finish(x, A, b, iterations, "pcg", tol, accept_tol)


def solve_general(
    A: Matrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
    accept_tol: float | None = None,
) -> SolveResult:
    """BiCGSTAB with Jacobi preconditioning, falling back to a direct LU solve."""
    b = _check_system(A, b)
    accept_tol = tol if accept_tol is None else max(tol, accept_tol)
    n = b.shape[0]
    if not np.any(b):
        return SolveResult(x=np.zeros(n), residual=0.0, iterations=0, method="bicgstab")
    cap = maxit if maxit is not None else max(1000, 10 * n)

    A_csr = sp.csr_matrix(A)
    diag = A_csr.diagonal()
    inv_diag = np.where(diag != 0, 1.0 / np.where(diag != 0, diag, 1.0), 1.0)
    preconditioner = spla.LinearOperator((n, n), matvec=lambda v: inv_diag * v, dtype=np.float64)
    counter = {"iterations": 0}

    def count(_: np.ndarray) -> None:
        counter["iterations"] += 1

    x, info = spla.bicgstab(
        A_csr, b, rtol=tol, atol=0.0, maxiter=cap, M=preconditioner, callback=count
    )
    residual = _relative_residual(A_csr, x, b)
    if info == 0 and residual <= tol:
        return _finish(x, A_csr, b, counter["iterations"], "bicgstab", tol, accept_tol)

    logger.info(
        "BiCGSTAB stopped (info=%s, residual %.3e); falling back to a direct solve", info, residual
    )
    try:
        if n <= DENSE_LU_LIMIT:
            x = la.lu_solve(la.lu_factor(A_csr.toarray()), b)
            method = "dense-lu"
        else:
            x = spla.splu(A_csr.tocsc()).solve(b)
            method = "sparse-lu"
    except (la.LinAlgError, RuntimeError) as exc:
        raise LinearSolverError(f"Direct solve failed: {exc}") from exc
    return _finish(x, A_csr, b, counter["iterations"], method, tol, accept_tol)


def _dense(matrix: Matrix) -> np.ndarray:
    shape = matrix.shape
    if len(shape) != 2:
        raise ValueError(f"Expected a matrix, got an array of shape {shape}")
    if shape[0] > MAX_DENSE_DOFS or shape[1] > MAX_DENSE_DOFS:
        raise DofLimitError(
            f"Dense spectral computations are limited to {MAX_DENSE_DOFS} DOFs, "
            f"got a {shape[0]}x{shape[1]} matrix"
        )
    if sp.issparse(matrix):
        matrix = matrix.toarray()
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix has non-finite entries")
    return matrix


def sym_eig(A: Matrix) -> tuple[np.ndarray, np.ndarray]:
    A = _dense(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    asymmetry = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asymmetry > SYMMETRY_TOL * scale:
        raise ValueError(f"Matrix is not symmetric: max |A - A^T| = {asymmetry:.3e}")
    return la.eigh(0.5 * (A + A.T))


def _cholesky(M: np.ndarray, name: str) -> np.ndarray:
    try:
        return la.cholesky(0.5 * (M + M.T), lower=True)
    except la.LinAlgError as exc:
        raise NormMatrixError(
            f"Cholesky factorisation of the {name} norm matrix failed: {exc}"
        ) from exc


def generalized_sym_eig(A: Matrix, M: Matrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``A x = λ M x`` for symmetric ``A`` and SPD ``M``, ascending."""
    A = _dense(A)
    L = _cholesky(_dense(M), "right-hand")
    reduced = la.solve_triangular(L, A, lower=True)
    reduced = la.solve_triangular(L, reduced.T, lower=True).T
    values, vectors = sym_eig(0.5 * (reduced + reduced.T))
    return values, la.solve_triangular(L.T, vectors, lower=False)


def generalized_singular_values(
    A: Matrix, M_left: Matrix, M_right: Matrix
) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) of ``L_left^{-1} A L_right^{-T}`` and trial directions.

    The columns of the returned directions are ``L_right^{-T} v`` for the right
    singular vectors ``v``, i.e. unit vectors in the ``M_right`` norm.
    """
    A = _dense(A)
    left = _cholesky(_dense(M_left), "left")
    right = _cholesky(_dense(M_right), "right")
    if A.shape != (left.shape[0], right.shape[0]):
        raise ValueError(
            f"Matrix shape {A.shape} does not match norm sizes {left.shape[0]}, {right.shape[0]}"
        )
    reduced = la.solve_triangular(left, A, lower=True)
    reduced = la.solve_triangular(right, reduced.T, lower=True).T
    _, singular, vt = la.svd(reduced)
    directions = la.solve_triangular(right.T, vt.T, lower=False)
    return singular, directions


def smallest_gsv(A: Matrix, M_left: Matrix, M_right: Matrix) -> SingularValueResult:
    """``inf_w sup_v vᵀAw / (|v|_left |w|_right)``, the discrete inf-sup constant."""
    singular, directions = generalized_singular_values(A, M_left, M_right)
    return SingularValueResult(value=float(singular[-1]), direction=directions[:, -1])


def largest_gsv(A: Matrix, M_left: Matrix, M_right: Matrix) -> SingularValueResult:
    """``sup_w sup_v vᵀAw / (|v|_left |w|_right)``, the continuity constant."""
    singular, directions = generalized_singular_values(A, M_left, M_right)
    return SingularValueResult(value=float(singular[0]), direction=directions[:, 0])
