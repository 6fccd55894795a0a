"""Interior penalty bilinear form, load vectors and mesh-dependent norm matrices.

Jumps and averages follow the usual conventions: on an interior face with
neighbours 1, 2 and outward normals ``n1 = -n2``

    {v} = (v1 + v2)/2,  [v] = v1 n1 + v2 n2,  [q] = q1·n1 + q2·n2,

and on a boundary face ``{v} = v``, ``[v] = v n``.

Global matrices are CSR with one row per test function and one column per
trial function.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from ..models.config import PenaltyConfig
from ..models.functions import ExactFunction, Field
from ..models.mesh import Face, Mesh
from .space import DGSpace, FaceData, FaceSide

logger = logging.getLogger(__name__)


class NormKind(str, enum.Enum):
    L2 = "l2"
    ENERGY = "energy"
    Z = "z"
    H2H = "h2h"


def sigma_on_face(
    face: Face | float | np.ndarray, cfg: PenaltyConfig, k: int
) -> float | np.ndarray:
    """Penalty ``csigma * k**2 / face_h**p``."""
    h = face.h if isinstance(face, Face) else np.asarray(face, dtype=np.float64)
    if np.any(h <= 0):
        raise ValueError("Face size must be positive")
    sigma = cfg.csigma * k * k / h**cfg.penalty_exponent
    return float(sigma) if np.ndim(sigma) == 0 else sigma


def csigma_threshold(k: int, cinv: float, cqu: float) -> float:
    """Sufficient penalty constant ``max{4, 24 k^-2 C_inv C_qu, 8 C_inv C_qu}``."""
    for name, value in (("k", k), ("cinv", cinv), ("cqu", cqu)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    product = cinv * cqu
    return max(4.0, 24.0 * product / (k * k), 8.0 * product)


@dataclass(frozen=True, slots=True)
class JumpAverage:
    jump: np.ndarray
    average: np.ndarray


def jump_average_eval(
    values: Sequence[np.ndarray], normals: Sequence[np.ndarray], *, vector: bool = False
) -> JumpAverage:
    """Jump and average from the traces of one (boundary) or two (interior) sides.

    Scalar traces ``(...,)`` give a vector jump ``(..., 2)``; vector traces
    ``(..., 2)`` (``vector=True``) give a scalar jump. Normals must broadcast
    against ``(..., 2)``.
    """
    if len(values) not in (1, 2) or len(values) != len(normals):
        raise ValueError("Expected traces and normals from one or two sides")
    traces = [np.asarray(v, dtype=np.float64) for v in values]
    norms = [np.asarray(n, dtype=np.float64) for n in normals]
    average = sum(traces) / len(traces)
    if vector:
        jump = sum(np.sum(v * n, axis=-1) for v, n in zip(traces, norms))
    else:
        jump = sum(v[..., None] * n for v, n in zip(traces, norms))
    return JumpAverage(jump=jump, average=average)


class _Triplets:
    """Накопитель плотных блоков в формате COO."""

    def __init__(self, size: int) -> None:
        self.size = size
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, row_dofs: np.ndarray, col_dofs: np.ndarray, blocks: np.ndarray) -> None:
        rows = np.broadcast_to(row_dofs[:, :, None], blocks.shape)
        cols = np.broadcast_to(col_dofs[:, None, :], blocks.shape)
        self.rows.append(rows.reshape(-1))
        self.cols.append(cols.reshape(-1))
        self.vals.append(blocks.reshape(-1))

    def tocsr(self) -> sp.csr_matrix:
        if not self.vals:
            return sp.csr_matrix((self.size, self.size))
        matrix = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.size, self.size),
        ).tocsr()
        matrix.sum_duplicates()
        matrix.sort_indices()
        return matrix


def _symmetrized(matrix: sp.csr_matrix) -> sp.csr_matrix:
    result = ((matrix + matrix.T) * 0.5).tocsr()
    result.sort_indices()
    return result


def _side_pairs(data: FaceData) -> Iterator[tuple[FaceSide, FaceSide, float]]:
    """(test side, trial side, n_test·n_trial) for every pairing on the faces."""
    for s in data.sides:
        for t in data.sides:
            yield s, t, 1.0 if s is t else -1.0


def _normal_derivatives(side: FaceSide, normals: np.ndarray) -> np.ndarray:
    return np.einsum("fqnd,fd->fqn", side.gradients, normals)


def _mass_blocks(weights: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return np.einsum("fq,fqi,fqj->fij", weights, left, right)


def _add_volume_gradients(space: DGSpace, triplets: _Triplets) -> None:
    data = space.volume_data()
    blocks = np.einsum("eq,eqid,eqjd->eij", data.weights, data.gradients, data.gradients)
    dofs = space.element_dofs()
    triplets.add(dofs, dofs, blocks)


def _add_penalty(
    space: DGSpace, triplets: _Triplets, weight: Callable[[np.ndarray], np.ndarray]
) -> None:
    """``∫ w(h) [φ_i]·[φ_j]`` over all faces."""
    for interior in (True, False):
        data = space.face_data(interior)
        if data.faces.size == 0:
            continue
        scaled = data.weights * weight(data.h)[:, None]
        for test, trial, sign in _side_pairs(data):
            blocks = sign * _mass_blocks(scaled, test.values, trial.values)
            triplets.add(space.element_dofs(test.elements), space.element_dofs(trial.elements), blocks)


def _consistency_matrix(space: DGSpace) -> sp.csr_matrix:
    """``C_ij = -∫_Γ [φ_i]·{∇φ_j}``."""
    triplets = _Triplets(space.ndofs)
    for interior in (True, False):
        data = space.face_data(interior)
        if data.faces.size == 0:
            continue
        share = 0.5 if interior else 1.0
        for test, trial, _ in _side_pairs(data):
            dn = _normal_derivatives(trial, test.normals)
            blocks = -share * _mass_blocks(data.weights, test.values, dn)
            triplets.add(space.element_dofs(test.elements), space.element_dofs(trial.elements), blocks)
    return triplets.tocsr()


def assemble_sip(mesh: Mesh, space: DGSpace, cfg: PenaltyConfig) -> sp.csr_matrix:
    """Interior penalty matrix ``A_ij = A_h(φ_j, φ_i)``.

    ``A_h(u, v) = ∫ ∇u·∇v - ∫_Γ ([v]·{∇u} + θ [u]·{∇v} - σ [u]·[v])``.
    For ``θ = 1`` the result is bitwise symmetric.
    """
    if space.mesh is not mesh:
        raise ValueError("Space was built on a different mesh")
    k = space.k
    triplets = _Triplets(space.ndofs)
    _add_volume_gradients(space, triplets)
    _add_penalty(space, triplets, lambda h: sigma_on_face(h, cfg, k))
    symmetric_part = _symmetrized(triplets.tocsr())
    consistency = _consistency_matrix(space)
    if cfg.symmetric:
        matrix = symmetric_part + (consistency + consistency.T)
    else:
        matrix = symmetric_part + consistency + cfg.theta * consistency.T
    matrix = matrix.tocsr()
    matrix.sort_indices()
    logger.debug(
        "Assembled SIP matrix: %s dofs, %s nonzeros, theta=%s", space.ndofs, matrix.nnz, cfg.theta
    )
    return matrix


def assemble_load(f: Callable[[np.ndarray], np.ndarray], space: DGSpace, order: int | None = None) -> np.ndarray:
    """``b_i = ∫ f φ_i``; ``f`` is any callable of points, e.g. ``Problem.source``."""
    data = space.volume_data(space.error_order if order is None else order)
    samples = f(data.points)
    return np.einsum("eq,eqn->en", samples * data.weights, data.values).reshape(-1)


def assemble_ritz_rhs(
    u: ExactFunction, space: DGSpace, cfg: PenaltyConfig, order: int | None = None
) -> np.ndarray:
    """``b_i = A_h(u, φ_i)`` for a continuous ``u`` vanishing on the boundary.

    Jumps of ``u`` vanish, so neither θ nor σ of ``cfg`` contributes.
    """
    if not u.homogeneous_dirichlet:
        raise ValueError(
            f"Ritz right-hand side needs '{u.name}' flagged as vanishing on the boundary"
        )
    order = space.error_order if order is None else order
    vol = space.volume_data(order)
    grad_u = u.gradient(vol.points)
    rhs = np.einsum("eq,eqd,eqnd->en", vol.weights, grad_u, vol.gradients).reshape(-1)
    for interior in (True, False):
        data = space.face_data(interior, order)
        if data.faces.size == 0:
            continue
        grad = u.gradient(data.points)
        for side in data.sides:
            dn = np.einsum("fqd,fd->fq", grad, side.normals)
            local = -np.einsum("fq,fq,fqn->fn", data.weights, dn, side.values)
            np.add.at(rhs, space.element_dofs(side.elements), local)
    logger.debug("Ritz right-hand side for %s (theta=%s ignored)", u.name, cfg.theta)
    return rhs


def _norm_triplets(kind: NormKind, space: DGSpace, cfg: PenaltyConfig) -> _Triplets:
    triplets = _Triplets(space.ndofs)
    dofs = space.element_dofs()
    vol = space.volume_data()
    if kind in (NormKind.L2, NormKind.Z):
        triplets.add(dofs, dofs, _mass_blocks(vol.weights, vol.values, vol.values))
    if kind in (NormKind.ENERGY, NormKind.H2H):
        _add_volume_gradients(space, triplets)
    if kind is NormKind.ENERGY:
        _add_penalty(space, triplets, lambda h: sigma_on_face(h, cfg, space.k))
    if kind is NormKind.Z:
        _add_penalty(space, triplets, lambda h: h)
        for interior in (True, False):
            data = space.face_data(interior)
            if data.faces.size == 0:
                continue
            share = 0.25 if interior else 1.0
            for test, trial, _ in _side_pairs(data):
                scaled = data.weights * (share * data.h**3)[:, None]
                blocks = np.einsum("fq,fqid,fqjd->fij", scaled, test.gradients, trial.gradients)
                triplets.add(space.element_dofs(test.elements), space.element_dofs(trial.elements), blocks)
                if interior:
                    scaled = data.weights * (share * data.h)[:, None]
                    blocks = _mass_blocks(scaled, test.values, trial.values)
                    triplets.add(space.element_dofs(test.elements), space.element_dofs(trial.elements), blocks)
    if kind is NormKind.H2H:
        triplets.add(dofs, dofs, _mass_blocks(vol.weights, vol.laplacians, vol.laplacians))
        _add_penalty(space, triplets, lambda h: h**-3.0)
        data = space.face_data(True)
        if data.faces.size:
            scaled = data.weights / data.h[:, None]
            for test, trial, _ in _side_pairs(data):
                blocks = _mass_blocks(
                    scaled,
                    _normal_derivatives(test, test.normals),
                    _normal_derivatives(trial, trial.normals),
                )
                triplets.add(space.element_dofs(test.elements), space.element_dofs(trial.elements), blocks)
    return triplets


def assemble_norm_matrix(
    kind: NormKind | str, mesh: Mesh, space: DGSpace, cfg: PenaltyConfig
) -> sp.csr_matrix:
    """Gram matrix of one of the mesh-dependent norms on the space.

    * ``l2``: ``||w||²``
    * ``energy``: ``||∇_h w||² + ||√σ [w]||²_Γ``
    * ``z``: ``||w||² + ||h^{3/2} {∇w}||²_Γ + ||h^{1/2} {w}||²_Γint + ||h^{1/2} [w]||²_Γ``
    * ``h2h``: ``||∇_h w||² + ||Δ_h w||² + ||h^{-1/2} [∇w]||²_Γint + ||h^{-3/2} [w]||²_Γ``
    """
    kind = NormKind(kind)
    if space.mesh is not mesh:
        raise ValueError("Space was built on a different mesh")
    matrix = _symmetrized(_norm_triplets(kind, space, cfg).tocsr())
    logger.debug("Assembled %s norm matrix: %s nonzeros", kind.value, matrix.nnz)
    return matrix


def norm_by_quadrature(
    kind: NormKind | str,
    field: Field,
    space: DGSpace,
    cfg: PenaltyConfig,
    order: int | None = None,
) -> float:
    """Evaluate a mesh-dependent norm of any field by direct quadrature of its terms."""
    kind = NormKind(kind)
    order = space.error_order if order is None else order
    mesh = space.mesh
    vol = space.volume_data(order)
    elements = np.arange(mesh.nelems)
    ref = np.broadcast_to(vol.rule.points, vol.points.shape)
    sample = field.sample(elements, ref, vol.points)

    total = 0.0
    if kind in (NormKind.L2, NormKind.Z):
        total += float(np.sum(vol.weights * sample.values**2))
    if kind in (NormKind.ENERGY, NormKind.H2H):
        total += float(np.sum(vol.weights * np.sum(sample.gradients**2, axis=-1)))
    if kind is NormKind.H2H:
        total += float(np.sum(vol.weights * sample.laplacians**2))
    if kind is NormKind.L2:
        return float(np.sqrt(total))

    for interior in (True, False):
        data = space.face_data(interior, order)
        if data.faces.size == 0:
            continue
        traces = [field.sample(side.elements, side.ref_points, data.points) for side in data.sides]
        normals = [side.normals[:, None, :] for side in data.sides]
        values = jump_average_eval([t.values for t in traces], normals)
        grads = jump_average_eval([t.gradients for t in traces], normals, vector=True)
        h = data.h[:, None]
        jump_sq = np.sum(values.jump**2, axis=-1)
        if kind is NormKind.ENERGY:
            total += float(np.sum(data.weights * sigma_on_face(h, cfg, space.k) * jump_sq))
        elif kind is NormKind.Z:
            total += float(np.sum(data.weights * h**3 * np.sum(grads.average**2, axis=-1)))
            total += float(np.sum(data.weights * h * jump_sq))
            if interior:
                total += float(np.sum(data.weights * h * values.average**2))
        else:
            total += float(np.sum(data.weights * h**-3.0 * jump_sq))
            if interior:
                total += float(np.sum(data.weights / h * grads.jump**2))
    return float(np.sqrt(total))
