import json

import numpy as np
import pytest

from ipdg_lab.core.mesh_builder import gen_geometric
from ipdg_lab.models.mesh import MeshValidationError
from ipdg_lab.utils.mesh_io import mesh_from_dict, mesh_to_dict, read_mesh, write_mesh

SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def test_mesh_survives_a_file_round_trip(tmp_path):
    mesh = gen_geometric(0.7, 3)
    path = write_mesh(mesh, tmp_path / "mesh.json")
    loaded = read_mesh(path)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.array_equal(loaded.refinement_edge, mesh.refinement_edge)
    assert path.read_text(encoding="utf-8").endswith("\n")


def test_minimal_mesh_without_optional_keys():
    mesh = mesh_from_dict({"vertices": SQUARE, "triangles": [[0, 1, 2], [0, 2, 3]]})
    assert mesh.nelems == 2
    assert mesh.boundary_vertices.tolist() == [0, 1, 2, 3]


def test_hanging_node_is_rejected(tmp_path):
    data = {"vertices": SQUARE + [[0.5, 0.5]], "triangles": [[0, 1, 2], [0, 4, 3], [4, 2, 3]]}
    path = tmp_path / "hanging.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(MeshValidationError, match="face"):
        read_mesh(path)


def test_missing_keys():
    with pytest.raises(MeshValidationError, match="missing keys: triangles"):
        mesh_from_dict({"vertices": SQUARE})
    with pytest.raises(MeshValidationError, match="JSON object"):
        mesh_from_dict([SQUARE])


def test_malformed_arrays():
    with pytest.raises(MeshValidationError, match="x, y"):
        mesh_from_dict({"vertices": [[0.0, 0.0, 0.0]], "triangles": [[0, 0, 0]]})
    with pytest.raises(MeshValidationError, match="finite"):
        mesh_from_dict({"vertices": [[0.0, float("nan")]] + SQUARE[1:], "triangles": [[0, 1, 2]]})


def test_declared_boundary_must_match_geometry():
    data = mesh_to_dict(gen_geometric(0.5, 1))
    data["boundary_vertices"] = data["boundary_vertices"][1:]
    with pytest.raises(MeshValidationError, match="boundary_vertices"):
        mesh_from_dict(data)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(MeshValidationError, match="not valid JSON"):
        read_mesh(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_mesh(tmp_path / "absent.json")
