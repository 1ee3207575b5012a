"""Mesh loading, quadratic promotion, projection, and element-size metrics."""

import numpy as np
import pytest

from spectralstokes.errors import MeshError
from spectralstokes.mesh import (
    BoundaryGeometry,
    BoundaryPatch,
    CircleBoundary,
    CylinderBoundary,
    Mesh,
    element_size,
    load_mesh,
    promote_to_quadratic,
    read_vtk_mesh,
    write_mesh,
)
from spectralstokes.structured import channel_grid, pipe_grid


def minimal_enclosing_diameter(points):
    """Grid-refinement oracle: minimize the max vertex distance over centers."""
    points = np.asarray(points, dtype=float)
    center = points.mean(axis=0)
    span = np.linalg.norm(points - center, axis=1).max()
    for _ in range(30):
        dim = points.shape[1]
        offsets = np.stack(
            np.meshgrid(*([np.linspace(-span, span, 9)] * dim), indexing="ij"), axis=-1
        ).reshape(-1, dim)
        cands = center + offsets
        radii = np.linalg.norm(points[None, :, :] - cands[:, None, :], axis=2).max(axis=1)
        best = int(np.argmin(radii))
        center = cands[best]
        span *= 0.35
    return 2.0 * radii[best]


def test_unit_square_mesh_counts(unit_square_mesh):
    assert unit_square_mesh.n_nodes == 4
    assert unit_square_mesh.n_elements == 2
    assert unit_square_mesh.boundary_patches["boundary"].faces.shape == (4, 2)


def test_benchmark_channel_counts(tmp_path):
    # 3,762 linear triangles producing 2,000 nodes.
    mesh = channel_grid(99, 19)
    path = tmp_path / "channel.msh"
    write_mesh(mesh, path)
    loaded = load_mesh(path)
    assert loaded.n_elements == 3762
    assert loaded.n_nodes == 2000


def test_native_roundtrip_preserves_patches(tmp_path, unit_square_mesh):
    path = tmp_path / "m.msh"
    write_mesh(unit_square_mesh, path)
    again = load_mesh(path)
    assert np.array_equal(again.nodes, unit_square_mesh.nodes)
    assert np.array_equal(again.elements, unit_square_mesh.elements)
    assert list(again.boundary_patches) == ["boundary"]
    assert again.boundary_patches["boundary"].kind == "wall"


def test_dangling_node_index_rejected(tmp_path):
    path = tmp_path / "bad.msh"
    lines = ["2 10 1 0"]
    lines += [f"{0.1 * i} {0.2 * i}" for i in range(10)]
    lines += ["0 1 999"]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshError, match="999"):
        load_mesh(path)


def test_negative_volume_rejected():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="volume"):
        Mesh(nodes, np.array([[0, 2, 1]]))


def test_patch_face_must_be_boundary(unit_square_mesh):
    patches = {
        "bad": BoundaryPatch(kind="wall", faces=np.array([[0, 2]]))  # interior diagonal
    }
    with pytest.raises(MeshError, match="boundary face"):
        Mesh(unit_square_mesh.nodes, unit_square_mesh.elements, patches)


def test_promote_single_triangle_counts(single_triangle_qmesh):
    q = single_triangle_qmesh
    assert q.n_velocity_nodes == 6
    assert q.n_vertices == 3
    assert q.vel_conn.shape == (1, 6)


def test_promote_single_tet_counts(single_tet_qmesh):
    q = single_tet_qmesh
    assert q.n_velocity_nodes == 10
    assert q.n_vertices == 4
    assert q.vel_conn.shape == (1, 10)


def test_velocity_node_count_is_vertices_plus_edges():
    mesh = channel_grid(7, 3)
    q = promote_to_quadratic(mesh)
    assert q.n_velocity_nodes == q.n_vertices + q.n_edges


def test_midpoint_projection_onto_circle():
    # Square with one edge declared to lie on a circle of radius R.
    radius = 2.0
    theta = np.array([-0.3, 0.3])
    arc = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    nodes = np.vstack([arc, [[0.0, 0.5], [0.0, -0.5]]])
    elements = np.array([[0, 1, 2], [0, 2, 3]])
    patches = {
        "curved": BoundaryPatch(kind="wall", faces=np.array([[0, 1]])),
        "rest": BoundaryPatch(kind="wall", faces=np.array([[1, 2], [2, 3], [3, 0]])),
    }
    mesh = Mesh(nodes, elements, patches)
    geom = BoundaryGeometry(surfaces={"curved": CircleBoundary(center=(0.0, 0.0), radius=radius)})
    q = promote_to_quadratic(mesh, geom)
    mid = q.nodes[q.boundary_patches["curved"].face_conn[0, 2]]
    assert abs(np.linalg.norm(mid) - radius) <= 1e-12 * radius


def test_projection_too_far_rejected():
    # Surface far from the edge midpoint: the node would move by more than
    # half the edge length, which promotion treats as a projection failure.
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = Mesh(
        nodes,
        np.array([[0, 1, 2]]),
        {"b": BoundaryPatch(kind="wall", faces=np.array([[0, 1], [1, 2], [2, 0]]))},
    )
    geom = BoundaryGeometry(surfaces={"b": CircleBoundary(center=(50.0, 0.0), radius=1.0)})
    with pytest.raises(MeshError, match="half the edge length"):
        promote_to_quadratic(mesh, geom)


def test_projection_degenerate_point_rejected():
    center = CircleBoundary(center=(0.5, 0.0), radius=1.0)
    with pytest.raises(MeshError, match="center"):
        center.project(np.array([[0.5, 0.0]]))
    cyl = CylinderBoundary(point=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0), radius=1.0)
    with pytest.raises(MeshError, match="axis"):
        cyl.project(np.array([[0.0, 0.0, 3.0]]))


def test_projection_idempotent():
    mesh, geom = pipe_grid(2, 3, radius=1.0, length=1.5)
    q1 = promote_to_quadratic(mesh, geom)
    wall_nodes = np.unique(q1.boundary_patches["wall"].face_conn)
    pts = q1.nodes[wall_nodes]
    moved = geom.surfaces["wall"].project(pts)
    diameter = np.linalg.norm(np.ptp(mesh.nodes, axis=0))
    assert np.abs(moved - pts).max() < 1e-14 * diameter


def test_edge_sharing_between_elements(unit_square_mesh):
    q = promote_to_quadratic(unit_square_mesh)
    # Elements (0,1,2) and (0,2,3) share edge (0,2): same mid-edge node index.
    conn = q.vel_conn
    shared_a = set(conn[0, 3:])
    shared_b = set(conn[1, 3:])
    assert len(shared_a & shared_b) == 1


def test_promotion_preserves_vertex_connectivity():
    mesh = channel_grid(5, 4)
    q = promote_to_quadratic(mesh)
    assert np.array_equal(q.elements, mesh.elements)
    assert np.array_equal(q.vel_conn[:, :3], mesh.elements)


def test_element_size_right_isoceles():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = Mesh(nodes, np.array([[0, 1, 2]]))
    h, hmax = element_size(mesh)
    assert hmax == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_element_size_equilateral_matches_bruteforce():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])
    mesh = Mesh(nodes, np.array([[0, 1, 2]]))
    _, hmax = element_size(mesh)
    assert hmax == pytest.approx(2.0 / np.sqrt(3.0), rel=1e-12)
    assert hmax == pytest.approx(minimal_enclosing_diameter(nodes), rel=1e-6)


def test_element_size_regular_tet_matches_bruteforce():
    nodes = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    ) / (2.0 * np.sqrt(2.0))  # regular tetrahedron with unit edge
    mesh = Mesh(nodes, np.array([[0, 2, 1, 3]]))
    _, hmax = element_size(mesh)
    assert hmax == pytest.approx(np.sqrt(1.5), rel=1e-12)
    assert hmax == pytest.approx(minimal_enclosing_diameter(nodes), rel=1e-6)


def test_element_size_obtuse_tet_uses_face_or_edge_support():
    # Flat, obtuse tetrahedron: circumsphere is larger than the minimal sphere.
    nodes = np.array(
        [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [2.0, 0.5, 0.0], [2.0, 0.2, 0.3]]
    )
    mesh = Mesh(nodes, np.array([[0, 1, 2, 3]]))
    _, hmax = element_size(mesh)
    assert hmax == pytest.approx(minimal_enclosing_diameter(nodes), rel=1e-5)


@pytest.mark.parametrize("angle", [0.3, 1.2, 2.5])
def test_element_size_rigid_invariance(angle):
    mesh = channel_grid(6, 3)
    h0, _ = element_size(mesh)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    moved = Mesh(mesh.nodes @ rot.T + np.array([3.0, -7.0]), mesh.elements)
    h1, _ = element_size(moved)
    assert np.allclose(h0, h1, rtol=1e-12)


def test_pipe_grid_volume_and_conformity():
    mesh, geom = pipe_grid(3, 4, radius=1.0, length=2.0)
    from spectralstokes.mesh import signed_volumes

    vols = signed_volumes(mesh.nodes, mesh.elements)
    assert np.all(vols > 0)
    # Total volume equals (polygon area) * length for the straight-walled grid.
    disk = mesh.nodes[mesh.nodes[:, 2] == 0.0][:, :2]
    tris = mesh.boundary_patches["inlet"].faces
    area = 0.0
    for f in tris:
        p = mesh.nodes[list(f)][:, :2]
        e1, e2 = p[1] - p[0], p[2] - p[0]
        area += 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    assert vols.sum() == pytest.approx(area * 2.0, rel=1e-12)


def test_vtk_reader_linear_grid(tmp_path):
    lines = [
        "# vtk DataFile Version 3.0",
        "tiny",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS 4 double",
        "0 0 0",
        "1 0 0",
        "1 1 0",
        "0 1 0",
        "CELLS 2 8",
        "3 0 1 2",
        "3 0 2 3",
        "CELL_TYPES 2",
        "5",
        "5",
    ]
    path2 = tmp_path / "tiny.vtk"
    path2.write_text("\n".join(lines) + "\n")
    mesh2 = read_vtk_mesh(path2)
    assert mesh2.n_nodes == 4
    assert mesh2.n_elements == 2
    assert mesh2.boundary_patches["boundary"].faces.shape[0] == 4
