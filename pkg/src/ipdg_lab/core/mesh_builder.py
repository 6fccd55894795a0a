"""Генераторы сеток единичного квадрата."""
from __future__ import annotations

import logging
import math

import numpy as np

from ..models.mesh import Mesh

logger = logging.getLogger(__name__)


def tensor_mesh(xs: np.ndarray, ys: np.ndarray) -> Mesh:
    """Triangulate the tensor grid ``xs × ys`` cutting each cell along its SW-NE diagonal."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or ys.ndim != 1 or xs.size < 2 or ys.size < 2:
        raise ValueError("Tensor grids need at least two breakpoints per axis")
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise ValueError("Tensor grid breakpoints must be strictly increasing")
    nx, ny = xs.size, ys.size
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)

    index = np.arange(nx * ny).reshape(nx, ny)
    sw = index[:-1, :-1].reshape(-1)
    se = index[1:, :-1].reshape(-1)
    ne = index[1:, 1:].reshape(-1)
    nw = index[:-1, 1:].reshape(-1)
    lower = np.stack([sw, se, ne], axis=1)
    upper = np.stack([sw, ne, nw], axis=1)
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles)


def gen_uniform(n: int) -> Mesh:
    """``(n+1)**2`` vertices and ``2 n**2`` congruent right triangles."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"Subdivision count n must be a positive integer, got {n!r}")
    grid = np.linspace(0.0, 1.0, n + 1)
    mesh = tensor_mesh(grid, grid)
    logger.debug("Uniform mesh n=%s: %s triangles", n, mesh.nelems)
    return mesh


def default_corner_cells(beta: float) -> int:
    """Smallest cell count that keeps the corner band no wider than its neighbour."""
    return max(1, math.ceil(beta / (1.0 - beta) - 1e-9))


def geometric_breakpoints(beta: float, levels: int, corner_cells: int | None = None) -> np.ndarray:
    """Breakpoints ``0, β^N, β^(N-1), ..., β, 1`` with the band ``(0, β^N)`` subdivided."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"Grading ratio beta must lie in (0, 1), got {beta}")
    if isinstance(levels, bool) or not isinstance(levels, (int, np.integer)) or levels < 1:
        raise ValueError(f"Number of levels N must be a positive integer, got {levels!r}")
    if corner_cells is None:
        corner_cells = default_corner_cells(beta)
    if corner_cells < 1:
        raise ValueError(f"corner_cells must be at least 1, got {corner_cells}")
    geometric = beta ** np.arange(levels, -1, -1, dtype=np.float64)
    band = np.linspace(0.0, geometric[0], corner_cells + 1)[:-1]
    return np.concatenate([band, geometric])


def gen_geometric(beta: float, levels: int, corner_cells: int | None = None) -> Mesh:
    """Mesh graded geometrically towards the corner (0, 0).

    With ``corner_cells=1`` this is the plain tensor grid on
    ``{0, β^N, ..., β, 1}`` in each direction (N+2 points, ``2(N+1)**2``
    triangles). The default splits the bottom-left band into
    ``c = ceil(β/(1-β))`` equal cells so that no cell is wider than its
    geometric neighbour.

    Note: with the default the counts become ``N+c+1`` points per axis and
    ``2(N+c)**2`` triangles (c = 9 for β = 0.9). Pass ``corner_cells=1`` when
    the literal counts matter.
    """
    points = geometric_breakpoints(beta, levels, corner_cells)
    mesh = tensor_mesh(points, points)
    logger.debug(
        "Geometric mesh beta=%s N=%s: %s points per axis, %s triangles",
        beta,
        levels,
        points.size,
        mesh.nelems,
    )
    return mesh


def shishkin_transition(epsilon: float, n: int) -> float:
    return min(0.5, 2.0 * epsilon * math.log(n))


def gen_shishkin(epsilon: float, n: int) -> Mesh:
    """Two-band mesh resolving a layer of width ``epsilon`` at ``x = 0``.

    ``n`` cells on ``[0, τ]`` and ``n`` on ``[τ, 1]`` in x, ``n`` uniform cells
    in y, with ``τ = min(1/2, 2 ε ln n)``.
    """
    if not 0.0 < epsilon <= 0.25:
        raise ValueError(f"Layer width epsilon must lie in (0, 1/4], got {epsilon}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"Cells per band n must be an integer >= 2, got {n!r}")
    tau = shishkin_transition(epsilon, n)
    xs = np.concatenate([np.linspace(0.0, tau, n + 1), np.linspace(tau, 1.0, n + 1)[1:]])
    ys = np.linspace(0.0, 1.0, n + 1)
    mesh = tensor_mesh(xs, ys)
    logger.debug("Shishkin mesh eps=%s n=%s: tau=%.6g, %s triangles", epsilon, n, tau, mesh.nelems)
    return mesh
