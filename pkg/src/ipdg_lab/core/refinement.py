"""Конформное измельчение: бисекция по новейшей вершине и красное измельчение."""
from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from ..models.mesh import Mesh

logger = logging.getLogger(__name__)

Edge = tuple[int, int]


def _edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def _refinement_edge(tri: tuple[int, int, int], r: int) -> Edge:
    return _edge(tri[(r + 1) % 3], tri[(r + 2) % 3])


def _close_marking(triangles: list[tuple[int, int, int]], tags: list[int], edges: set[Edge]) -> None:
    """Grow ``edges`` until every triangle touching a marked edge has its refinement edge marked."""
    changed = True
    while changed:
        changed = False
        for tri, r in zip(triangles, tags):
            ref = _refinement_edge(tri, r)
            if ref in edges:
                continue
            if any(_edge(tri[i], tri[(i + 1) % 3]) in edges for i in range(3)):
                edges.add(ref)
                changed = True


def refine_nvb(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Newest vertex bisection of the marked triangles plus conforming closure.

    The refinement edge of a triangle is the local edge ``refinement_edge[t]``,
    opposite the newest vertex. Bisecting ``(a, b, c)`` with peak ``a`` at the
    midpoint ``m`` of ``bc`` yields ``(a, b, m)`` and ``(a, m, c)``, with ``m``
    as the new peak of both children.
    """
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.nelems:
        raise ValueError(
            f"Marked element indices must lie in [0, {mesh.nelems - 1}], "
            f"got range [{marked[0]}, {marked[-1]}]"
        )

    # Rotate every triangle so that local vertex 0 is its peak.
    triangles = [
        tuple(int(v) for v in np.roll(tri, -int(r)))
        for tri, r in zip(mesh.triangles, mesh.refinement_edge)
    ]
    tags = [0] * len(triangles)
    edges = {_refinement_edge(triangles[t], 0) for t in marked}
    _close_marking(triangles, tags, edges)

    vertices = [tuple(p) for p in mesh.vertices.tolist()]
    midpoints: dict[Edge, int] = {}

    def midpoint(a: int, b: int) -> int:
        key = _edge(a, b)
        if key not in midpoints:
            pa, pb = vertices[a], vertices[b]
            vertices.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
            midpoints[key] = len(vertices) - 1
        return midpoints[key]

    new_triangles: list[tuple[int, int, int]] = []
    new_tags: list[int] = []
    stack = list(zip(reversed(triangles), [0] * len(triangles)))
    while stack:
        tri, r = stack.pop()
        if _refinement_edge(tri, r) not in edges:
            new_triangles.append(tri)
            new_tags.append(r)
            continue
        a, b, c = tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]
        m = midpoint(b, c)
        stack.append(((a, m, c), 1))
        stack.append(((a, b, m), 2))

    logger.debug(
        "NVB: %s marked, %s edges bisected, %s -> %s triangles",
        marked.size,
        len(edges),
        mesh.nelems,
        len(new_triangles),
    )
    return Mesh(np.array(vertices), np.array(new_triangles), np.array(new_tags))


def refine_nvb_uniform(mesh: Mesh, passes: int = 1) -> Mesh:
    """Bisect every element ``passes`` times; two passes halve every h_K."""
    for _ in range(passes):
        mesh = refine_nvb(mesh, range(mesh.nelems))
    return mesh


def elements_touching(mesh: Mesh, point: tuple[float, float] = (0.0, 0.0), tol: float = 1e-12) -> np.ndarray:
    """Indices of triangles having a vertex at ``point``."""
    hit = np.flatnonzero(np.linalg.norm(mesh.vertices - np.asarray(point), axis=1) < tol)
    return np.flatnonzero(np.isin(mesh.triangles, hit).any(axis=1))


def red_refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four similar children through its edge midpoints."""
    nv = mesh.nvertices
    mids = 0.5 * (
        mesh.vertices[mesh.face_vertices[:, 0]] + mesh.vertices[mesh.face_vertices[:, 1]]
    )
    vertices = np.vstack([mesh.vertices, mids])
    a, b, c = mesh.triangles.T
    mbc = nv + mesh.element_faces[:, 0]
    mca = nv + mesh.element_faces[:, 1]
    mab = nv + mesh.element_faces[:, 2]
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    logger.debug("Red refinement: %s -> %s triangles", mesh.nelems, children.shape[0])
    return Mesh(vertices, children)
