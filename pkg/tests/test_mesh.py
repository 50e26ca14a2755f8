import numpy as np
import pytest

from dumbbell.errors import LocationError, MeshError, PreconditionError
from dumbbell.geometry import DumbbellSpec, NeckProfile, assemble_dumbbell
from dumbbell.mesh import (
    MeshBudgetError, MeshParams, load_text, mesh_from_arrays, mesh_quality, neck_layers, triangle_angles,
    triangulate, triangulate_polygon,
)

UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def test_square_mesh_area():
    m = triangulate_polygon(UNIT_SQUARE, 0.5)
    assert m.n_triangles >= 8
    assert m.area == pytest.approx(1.0, abs=1e-14)


def test_dumbbell_mesh(small_dumbbell):
    geom, mesh, _ = small_dumbbell
    assert mesh.area == pytest.approx(geom.area, abs=1e-10)
    assert mesh.region_area("neck") == pytest.approx(geom.neck_area_exact(), rel=1e-10)
    assert mesh_quality(mesh)["min_angle"] >= 20.0 - 1e-9
    for x in geom.eps * np.linspace(-0.9, 0.9, 7):
        assert neck_layers(mesh, x) >= 8


def test_asymmetric_dumbbell_mesh():
    neck = NeckProfile(lambda x: 0.5 + 0.2 * x, 0.3)
    spec = DumbbellSpec.symmetric_rectangles(neck=neck)
    geom = assemble_dumbbell(spec, 0.05, 0.05)
    mesh = triangulate(geom, MeshParams(h_bulk=0.1))
    assert not mesh.meta["mirror"]
    assert mesh.area == pytest.approx(geom.area, abs=1e-10)
    assert mesh_quality(mesh)["min_angle"] >= 20.0 - 1e-9


def test_mirrored_mesh_is_symmetric(small_dumbbell):
    _, mesh, _ = small_dumbbell
    assert mesh.meta["mirror"]
    ref = mesh.nodes * np.array([-1.0, 1.0])
    a = np.lexsort(mesh.nodes.T)
    b = np.lexsort(ref.T)
    assert np.array_equal(mesh.nodes[a], ref[b])


def test_mesh_angles():
    eq = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    assert triangle_angles(eq, np.array([[0, 1, 2]])).min() == pytest.approx(60.0)
    m = mesh_from_arrays(np.array([[0, 0], [1, 0], [0, 1]], float), [[0, 1, 2]])
    assert mesh_quality(m)["min_angle"] == pytest.approx(45.0)


def test_budget_exceeded():
    spec = DumbbellSpec.symmetric_rectangles()
    geom = assemble_dumbbell(spec, 0.01, 0.01)
    with pytest.raises(MeshBudgetError):
        triangulate(geom, MeshParams(h_bulk=0.01, node_budget=2000))


def test_bad_params():
    with pytest.raises(PreconditionError):
        MeshParams(n_across=2)
    with pytest.raises(PreconditionError):
        MeshParams(layer_ratio=3.0)


def test_text_round_trip(tmp_path, small_dumbbell):
    _, mesh, _ = small_dumbbell
    mesh.save_text(tmp_path / "m.txt")
    back = load_text(tmp_path / "m.txt")
    assert np.array_equal(back.nodes, mesh.nodes)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.tags, mesh.tags)


def test_text_malformed(tmp_path):
    (tmp_path / "bad.txt").write_text("3 4\n0 0\n")
    with pytest.raises(MeshError):
        load_text(tmp_path / "bad.txt")


def test_locate_and_contains(small_dumbbell):
    _, mesh, _ = small_dumbbell
    pts = np.array([[0.0, 0.0], [-1.0, 0.5], [1.5, -0.9]])
    t, lam = mesh.locate(pts)
    rebuilt = np.einsum("qa,qad->qd", lam, mesh.nodes[mesh.triangles[t]])
    assert np.allclose(rebuilt, pts, atol=1e-13)
    assert mesh.contains(pts).all()
    outside = np.array([[0.0, 0.5], [5.0, 0.0]])
    assert not mesh.contains(outside).any()
    with pytest.raises(LocationError):
        mesh.locate(outside[0])


def test_token_tracks_content(small_dumbbell):
    _, mesh, _ = small_dumbbell
    other = mesh_from_arrays(mesh.nodes + 1e-3, mesh.triangles, mesh.tags)
    assert other.token != mesh.token
