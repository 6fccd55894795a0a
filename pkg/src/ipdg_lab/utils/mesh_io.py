"""Чтение и запись сеток в JSON."""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import numpy as np

from ..models.mesh import Mesh, MeshValidationError, conformity_check

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("vertices", "triangles")


def mesh_to_dict(mesh: Mesh) -> dict[str, list]:
    return {
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "boundary_vertices": mesh.boundary_vertices.tolist(),
        "refinement_edge": mesh.refinement_edge.tolist(),
    }


def mesh_from_dict(data: dict) -> Mesh:
    """Validate and build a mesh from the JSON schema."""
    if not isinstance(data, dict):
        raise MeshValidationError("Mesh file must contain a JSON object")
    missing = [key for key in REQUIRED_KEYS if key not in data]
    if missing:
        raise MeshValidationError(f"Mesh file is missing keys: {', '.join(missing)}")
    try:
        vertices = np.asarray(data["vertices"], dtype=np.float64)
        triangles = np.asarray(data["triangles"], dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise MeshValidationError(f"Malformed vertex or triangle arrays: {exc}") from exc
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshValidationError(f"'vertices' must be a list of [x, y] pairs, got shape {vertices.shape}")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshValidationError(f"'triangles' must be a list of index triples, got shape {triangles.shape}")
    if not np.all(np.isfinite(vertices)):
        raise MeshValidationError("Vertex coordinates must be finite")

    mesh = conformity_check(vertices, triangles, data.get("refinement_edge"))

    if "boundary_vertices" in data:
        declared = np.unique(np.asarray(data["boundary_vertices"], dtype=np.int64))
        actual = mesh.boundary_vertices
        if declared.shape != actual.shape or np.any(declared != actual):
            diff = np.setxor1d(declared, actual)
            raise MeshValidationError(
                f"'boundary_vertices' disagrees with the geometry at vertex {int(diff[0])}"
            )
    return mesh


def write_mesh(mesh: Mesh, path: str | os.PathLike[str]) -> Path:
    target = Path(path)
    target.write_text(json.dumps(mesh_to_dict(mesh)) + "\n", encoding="utf-8")
    logger.info("Mesh written to %s (%s triangles)", target, mesh.nelems)
    return target


def read_mesh(path: str | os.PathLike[str]) -> Mesh:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"File not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MeshValidationError(f"{source} is not valid JSON: {exc}") from exc
    mesh = mesh_from_dict(data)
    logger.info("Mesh read from %s: %r", source, mesh)
    return mesh
