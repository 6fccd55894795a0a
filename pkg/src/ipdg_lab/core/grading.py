"""Диагностика сетки: метрика градуировки α и связанные величины."""
from __future__ import annotations

import logging

import numpy as np

from ..models.mesh import GradingReport, Mesh

logger = logging.getLogger(__name__)


def face_grading(mesh: Mesh) -> np.ndarray:
    """``|[h]| / {h}`` on every interior face, in the order of ``mesh.interior_faces``."""
    faces = mesh.interior_faces
    h1 = mesh.diameters[mesh.face_elements[faces, 0]]
    h2 = mesh.diameters[mesh.face_elements[faces, 1]]
    return np.abs(h1 - h2) / (0.5 * (h1 + h2))


def face_grading_bound(mesh: Mesh) -> np.ndarray:
    """Upper bound ``2|[h²]| / {h²}`` of the grading ratio on every interior face."""
    faces = mesh.interior_faces
    h1 = mesh.diameters[mesh.face_elements[faces, 0]] ** 2
    h2 = mesh.diameters[mesh.face_elements[faces, 1]] ** 2
    return 2.0 * np.abs(h1 - h2) / (0.5 * (h1 + h2))


def geometric_grading_bound(beta: float, gap: int) -> float:
    """Closed-form grading bound of the geometric family for cells ``gap`` levels apart."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"Grading ratio beta must lie in (0, 1), got {beta}")
    if gap < 0:
        raise ValueError(f"Level gap must be non-negative, got {gap}")
    b2 = beta * beta
    return 4.0 * (1.0 - b2) / (1.0 + b2 + 2.0 * b2**gap)


def geometric_grading_sup(beta: float) -> float:
    """Supremum of :func:`geometric_grading_bound` over all gaps."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"Grading ratio beta must lie in (0, 1), got {beta}")
    b2 = beta * beta
    return 4.0 * (1.0 - b2) / (1.0 + b2)


def quasi_uniformity(mesh: Mesh) -> float:
    """Largest ratio ``max h_K / min h_K`` over the elements sharing a vertex."""
    largest = np.zeros(mesh.nvertices)
    smallest = np.full(mesh.nvertices, np.inf)
    h = np.repeat(mesh.diameters, 3)
    np.maximum.at(largest, mesh.triangles.reshape(-1), h)
    np.minimum.at(smallest, mesh.triangles.reshape(-1), h)
    used = np.isfinite(smallest)
    return float(np.max(largest[used] / smallest[used]))


def shape_regularity(mesh: Mesh) -> float:
    """``min_K ρ_K / h_K`` with ρ_K the inradius."""
    return float(np.min(mesh.inradii / mesh.diameters))


def grading_report(mesh: Mesh) -> GradingReport:
    ratios = face_grading(mesh)
    alpha = float(ratios.max()) if ratios.size else 0.0
    report = GradingReport(
        alpha=alpha,
        mu=shape_regularity(mesh),
        cqu=quasi_uniformity(mesh),
        face_count=mesh.nfaces,
        elem_count=mesh.nelems,
        h_min=float(mesh.diameters.min()),
        h_max=float(mesh.diameters.max()),
    )
    if alpha >= 1.0:
        logger.warning("Mesh grading alpha=%.4g violates alpha < 1", alpha)
    return report


def k2_grading(mesh: Mesh, k: int) -> float:
    """Degree-weighted grading ``||k² [h]/{h}||_inf``."""
    if k < 1:
        raise ValueError(f"Polynomial degree must be at least 1, got {k}")
    ratios = face_grading(mesh)
    return float(k * k * ratios.max()) if ratios.size else 0.0


def alpha_threshold(k: int, csigma: float, cinv: float, cqu: float, ctilde: float) -> float:
    """Admissible grading ``min{1, 1/(8 C_inv C_qu), c̃/(32 C_inv C_qu (2k² C_σ + 1))}``.

    Diagnostic only: the mesh is never rejected on this basis.
    """
    for name, value in (("k", k), ("csigma", csigma), ("cinv", cinv), ("cqu", cqu), ("ctilde", ctilde)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    product = cinv * cqu
    return min(
        1.0,
        1.0 / (8.0 * product),
        ctilde / (32.0 * product * (2.0 * k * k * csigma + 1.0)),
    )
