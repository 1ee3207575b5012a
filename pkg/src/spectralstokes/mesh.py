"""Simplex meshes: loading, quadratic promotion, and element-size metrics.

A :class:`Mesh` holds linear triangles or tetrahedra with named boundary
patches.  :func:`promote_to_quadratic` inserts one mid-edge velocity node per
unique edge (projecting boundary midpoints onto declared curved surfaces) and
returns a :class:`QuadraticMesh` carrying both the 6/10-node velocity
connectivity and the vertex-only pressure connectivity.  Element maps stay
affine: curved boundaries only move the inserted boundary nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshError

PATCH_KINDS = ("dirichlet", "neumann", "wall")

# Local edges in VTK quadratic-cell order (vertices first, then these edges).
TRI_EDGES = ((0, 1), (1, 2), (2, 0))
TET_EDGES = ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3))

# Local faces whose union is the element boundary.
TRI_FACES = ((0, 1), (1, 2), (2, 0))
TET_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))


@dataclass
class BoundaryPatch:
    """Named set of boundary faces with a boundary-condition kind."""

    kind: str
    faces: np.ndarray  # (n_faces, dim) vertex indices

    def __post_init__(self):
        if self.kind not in PATCH_KINDS:
            raise MeshError(f"unknown patch kind '{self.kind}' (expected one of {PATCH_KINDS})")
        self.faces = np.asarray(self.faces, dtype=int)


class Mesh:
    """Linear simplex mesh with named boundary patches.

    Immutable after construction; the constructor validates node indices,
    element orientation, and that every patch face is a boundary face of
    exactly one element.
    """

    def __init__(self, nodes, elements, boundary_patches=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=int)
        self.boundary_patches = dict(boundary_patches or {})
        self._validate()
        self.nodes.flags.writeable = False
        self.elements.flags.writeable = False

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def _validate(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] not in (2, 3):
            raise MeshError(f"nodes must be (n, 2) or (n, 3), got {self.nodes.shape}")
        dim = self.dim
        if self.elements.ndim != 2 or self.elements.shape[1] != dim + 1:
            raise MeshError(
                f"elements must be (n, {dim + 1}) for a {dim}D mesh, got {self.elements.shape}"
            )
        bad = np.nonzero((self.elements < 0) | (self.elements >= self.n_nodes))[0]
        if bad.size:
            raise MeshError(
                f"element {bad[0]} references node {self.elements[bad[0]].max()} "
                f"outside the {self.n_nodes}-node table"
            )
        vol = signed_volumes(self.nodes, self.elements)
        bad = np.nonzero(vol <= 0.0)[0]
        if bad.size:
            ids = ", ".join(str(i) for i in bad[:8])
            raise MeshError(f"non-positive element volume for element(s) {ids}")

        boundary = self._boundary_face_set()
        for name, patch in self.boundary_patches.items():
            if patch.faces.ndim != 2 or patch.faces.shape[1] != dim:
                raise MeshError(f"patch '{name}' faces must be (n, {dim}) vertex tuples")
            for f in patch.faces:
                if tuple(sorted(f)) not in boundary:
                    raise MeshError(
                        f"patch '{name}' face {tuple(f)} is not a boundary face of exactly one element"
                    )

    def _boundary_face_set(self):
        """Faces appearing in exactly one element."""
        local = TRI_FACES if self.dim == 2 else TET_FACES
        counts: dict[tuple, int] = {}
        for elem in self.elements:
            for loc in local:
                key = tuple(sorted(elem[list(loc)]))
                counts[key] = counts.get(key, 0) + 1
        return {f for f, c in counts.items() if c == 1}


def signed_volumes(nodes, elements):
    """Signed area (2D) or volume (3D) of each simplex."""
    p = nodes[elements]
    if nodes.shape[1] == 2:
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    e3 = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0


@dataclass
class CircleBoundary:
    """Circular arc boundary (2D): closest-point projection onto the circle."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    def project(self, points):
        points = np.atleast_2d(points)
        rel = points - self.center
        dist = np.linalg.norm(rel, axis=1)
        if np.any(dist < 1e-14 * self.radius):
            raise MeshError("cannot project point coincident with circle center")
        return self.center + rel * (self.radius / dist)[:, None]


@dataclass
class CylinderBoundary:
    """Cylindrical surface (3D) given by an axis point, direction, and radius."""

    point: np.ndarray
    axis: np.ndarray
    radius: float

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        axis = np.asarray(self.axis, dtype=float)
        self.axis = axis / np.linalg.norm(axis)

    def project(self, points):
        points = np.atleast_2d(points)
        rel = points - self.point
        axial = rel @ self.axis
        radial = rel - axial[:, None] * self.axis
        dist = np.linalg.norm(radial, axis=1)
        if np.any(dist < 1e-14 * self.radius):
            raise MeshError("cannot project point on the cylinder axis")
        return self.point + axial[:, None] * self.axis + radial * (self.radius / dist)[:, None]


@dataclass
class BoundaryGeometry:
    """Analytic surface descriptors for curved boundary patches.

    Patches absent from ``surfaces`` are treated as planar (no projection).
    """

    surfaces: dict = field(default_factory=dict)

    def project(self, patch: str, points):
        surf = self.surfaces.get(patch)
        if surf is None:
            return np.atleast_2d(points)
        return surf.project(points)

    def is_curved(self, patch: str) -> bool:
        return patch in self.surfaces


@dataclass
class QuadraticPatch:
    kind: str
    faces: np.ndarray       # (n_faces, dim) vertex indices
    face_conn: np.ndarray   # (n_faces, 3|6) velocity-node indices incl. mid-edges


class QuadraticMesh:
    """Mixed quadratic/linear mesh: P2 velocity nodes over P1 pressure vertices.

    ``nodes`` lists vertex coordinates first, then one mid-edge node per
    unique edge, so ``n_velocity_nodes == n_vertices + n_edges``.  Pressure
    connectivity is the vertex connectivity of the parent mesh.
    """

    def __init__(self, nodes, n_vertices, elements, vel_conn, edges, boundary_patches):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.n_vertices = int(n_vertices)
        self.elements = np.ascontiguousarray(elements, dtype=int)
        self.vel_conn = np.ascontiguousarray(vel_conn, dtype=int)
        self.edges = np.ascontiguousarray(edges, dtype=int)
        self.boundary_patches = dict(boundary_patches)
        for arr in (self.nodes, self.elements, self.vel_conn, self.edges):
            arr.flags.writeable = False

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_velocity_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def pres_conn(self):
        return self.elements

    def vertex_nodes(self):
        return self.nodes[: self.n_vertices]

    def element_size(self):
        """Per-element minimal-enclosing-circle/sphere diameter and the max."""
        return element_size(self)


def unique_edges(elements, dim):
    """Sorted unique vertex pairs and the per-element edge indices."""
    local = TRI_EDGES if dim == 2 else TET_EDGES
    raw = elements[:, np.array(local)]            # (ne, n_loc_edges, 2)
    raw = np.sort(raw.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    per_elem = inverse.reshape(elements.shape[0], len(local))
    return edges, per_elem


def promote_to_quadratic(mesh: Mesh, geom: BoundaryGeometry | None = None) -> QuadraticMesh:
    """Insert mid-edge velocity nodes, projecting boundary midpoints onto curved patches.

    Only mid-edge nodes lying on a patch with a declared surface are moved;
    interior nodes stay at the straight-edge midpoint.  Raises
    :class:`MeshError` if a projection degenerates or displaces a node by more
    than half its edge length.
    """
    geom = geom or BoundaryGeometry()
    dim = mesh.dim
    edges, per_elem = unique_edges(mesh.elements, dim)
    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])

    edge_index = {tuple(e): i for i, e in enumerate(edges)}

    # Project boundary-edge midpoints of curved patches.
    for name, patch in mesh.boundary_patches.items():
        if not geom.is_curved(name):
            continue
        for eid in _patch_edge_ids(patch, edge_index, dim):
            target = geom.project(name, midpoints[eid])[0]
            length = np.linalg.norm(mesh.nodes[edges[eid, 1]] - mesh.nodes[edges[eid, 0]])
            if np.linalg.norm(target - midpoints[eid]) > 0.5 * length:
                raise MeshError(
                    f"projection of edge {tuple(edges[eid])} midpoint onto patch '{name}' "
                    "moved it by more than half the edge length"
                )
            midpoints[eid] = target

    n_vert = mesh.n_nodes
    nodes = np.vstack([mesh.nodes, midpoints])
    vel_conn = np.hstack([mesh.elements, n_vert + per_elem])

    patches = {}
    for name, patch in mesh.boundary_patches.items():
        face_conn = _face_velocity_conn(patch.faces, edge_index, n_vert, dim)
        patches[name] = QuadraticPatch(kind=patch.kind, faces=patch.faces.copy(), face_conn=face_conn)

    return QuadraticMesh(nodes, n_vert, mesh.elements, vel_conn, edges, patches)


def _patch_edge_ids(patch, edge_index, dim):
    ids = set()
    for face in patch.faces:
        if dim == 2:
            ids.add(edge_index[tuple(sorted(face))])
        else:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                ids.add(edge_index[tuple(sorted((face[a], face[b])))])
    return sorted(ids)


def _face_velocity_conn(faces, edge_index, n_vert, dim):
    conn = []
    for face in faces:
        if dim == 2:
            mid = n_vert + edge_index[tuple(sorted(face))]
            conn.append([face[0], face[1], mid])
        else:
            mids = [
                n_vert + edge_index[tuple(sorted((face[a], face[b])))]
                for a, b in ((0, 1), (1, 2), (2, 0))
            ]
            conn.append([face[0], face[1], face[2], *mids])
    return np.asarray(conn, dtype=int)


def element_size(qmesh) -> tuple[np.ndarray, float]:
    """Diameter of the minimal circle/sphere enclosing each element's vertices.

    Accepts a :class:`Mesh` or :class:`QuadraticMesh`; only vertex positions
    enter (element maps are affine).  Returns ``(h_per_element, h_max)``.
    """
    if isinstance(qmesh, QuadraticMesh):
        nodes, elements = qmesh.vertex_nodes(), qmesh.elements
    else:
        nodes, elements = qmesh.nodes, qmesh.elements
    vol = np.abs(signed_volumes(nodes, elements))
    if np.any(vol < 1e-300):
        raise MeshError("degenerate (zero-volume) element in element_size")
    p = nodes[elements]
    if nodes.shape[1] == 2 and elements.shape[1] == 3:
        h = 2.0 * _min_enclosing_radius_tri(p)
    else:
        h = 2.0 * _min_enclosing_radius_tet(p)
    return h, float(h.max())


def _min_enclosing_radius_tri(p):
    """Minimal enclosing circle radius of each vertex triple (vectorized)."""
    # Side lengths opposite each vertex.
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    s = np.sort(np.stack([a, b, c], axis=1), axis=1)
    longest = s[:, 2]
    # Obtuse (or right) triangle: the longest side is a diameter.
    obtuse = s[:, 0] ** 2 + s[:, 1] ** 2 <= longest**2 * (1 + 1e-14)
    area = np.abs(signed_volumes_from_points(p))
    circum = a * b * c / (4.0 * area)
    return np.where(obtuse, 0.5 * longest, circum)


def signed_volumes_from_points(p):
    if p.shape[2] == 2:
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    e3 = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0


def _min_enclosing_radius_tet(p):
    """Minimal enclosing sphere radius of each vertex quadruple (vectorized).

    Checks every support set: the 6 edge-diameter spheres, the 4 face
    circumcircles, then the circumsphere.
    """
    ne = p.shape[0]
    best = np.full(ne, np.inf)
    idx = np.arange(4)
    tol = 1.0 + 1e-12

    for i in range(4):
        for j in range(i + 1, 4):
            center = 0.5 * (p[:, i] + p[:, j])
            r = 0.5 * np.linalg.norm(p[:, i] - p[:, j], axis=1)
            ok = np.ones(ne, dtype=bool)
            for k in idx:
                if k in (i, j):
                    continue
                ok &= np.linalg.norm(p[:, k] - center, axis=1) <= r * tol
            best = np.where(ok & (r < best), r, best)

    for tri in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        other = next(k for k in range(4) if k not in tri)
        center, r = _circumcircle_3d(p[:, tri[0]], p[:, tri[1]], p[:, tri[2]])
        ok = np.linalg.norm(p[:, other] - center, axis=1) <= r * tol
        best = np.where(ok & (r < best), r, best)

    center, r = _circumsphere(p)
    best = np.where(r < best, r, best)
    return best


def _circumcircle_3d(p0, p1, p2):
    u = p1 - p0
    v = p2 - p0
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    det = 2.0 * (uu * vv - uv * uv)
    alpha = (vv * (uu - uv)) / det
    beta = (uu * (vv - uv)) / det
    center = p0 + alpha[:, None] * u + beta[:, None] * v
    r = np.linalg.norm(center - p0, axis=1)
    return center, r


def _circumsphere(p):
    a = p[:, 1:] - p[:, :1]                     # (ne, 3, 3), rows p_i - p_0
    rhs = 0.5 * np.einsum("ijk,ijk->ij", a, a)  # (ne, 3)
    center_rel = np.linalg.solve(a, rhs[..., None])[..., 0]
    r = np.linalg.norm(center_rel, axis=1)
    return p[:, 0] + center_rel, r


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_mesh(path, fmt: str | None = None) -> Mesh:
    """Read a mesh from the native text format or a legacy-VTK file.

    ``fmt`` is ``"native"`` or ``"vtk"``; by default it is inferred from the
    extension (``.vtk`` selects the VTK reader).
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    if fmt is None:
        fmt = "vtk" if path.suffix.lower() == ".vtk" else "native"
    if fmt == "native":
        return _read_native(path)
    if fmt == "vtk":
        return read_vtk_mesh(path)
    raise MeshError(f"unknown mesh format '{fmt}'")


def _read_native(path: Path) -> Mesh:
    tokens = _token_lines(path)
    try:
        dim, n_nodes, n_elements, n_patches = (int(t) for t in next(tokens))
    except (StopIteration, ValueError) as exc:
        raise MeshError(f"{path}: bad header (expected 'dim n_nodes n_elements n_patches')") from exc
    if dim not in (2, 3):
        raise MeshError(f"{path}: unsupported dimension {dim}")
    try:
        nodes = np.array([[float(v) for v in next(tokens)[:dim]] for _ in range(n_nodes)])
        elements = np.array(
            [[int(v) for v in next(tokens)[: dim + 1]] for _ in range(n_elements)], dtype=int
        )
        patches = {}
        for _ in range(n_patches):
            head = next(tokens)
            if head[0] != "patch" or len(head) != 4:
                raise MeshError(f"{path}: expected 'patch <name> <kind> <n_faces>', got {head}")
            name, kind, n_faces = head[1], head[2], int(head[3])
            faces = np.array([[int(v) for v in next(tokens)[:dim]] for _ in range(n_faces)], dtype=int)
            patches[name] = BoundaryPatch(kind=kind, faces=faces)
    except StopIteration as exc:
        raise MeshError(f"{path}: truncated mesh file") from exc
    except ValueError as exc:
        raise MeshError(f"{path}: parse failure ({exc})") from exc
    return Mesh(nodes, elements, patches)


def _token_lines(path: Path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line.split()


def write_mesh(mesh: Mesh, path) -> None:
    """Write a mesh in the native text format (17 significant digits)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} {len(mesh.boundary_patches)}\n")
        for x in mesh.nodes:
            fh.write(" ".join(f"{v:.17g}" for v in x) + "\n")
        for e in mesh.elements:
            fh.write(" ".join(str(v) for v in e) + "\n")
        for name, patch in mesh.boundary_patches.items():
            fh.write(f"patch {name} {patch.kind} {len(patch.faces)}\n")
            for f in patch.faces:
                fh.write(" ".join(str(v) for v in f) + "\n")


def read_vtk_mesh(path) -> Mesh:
    """Read a legacy-VTK ASCII unstructured grid of triangles or tetrahedra.

    VTK files carry no patch metadata; all boundary faces are collected into a
    single no-slip patch named ``boundary``.
    """
    path = Path(path)
    words: list[str] = []
    with open(path) as fh:
        lines = fh.readlines()
    if len(lines) < 4 or "vtk" not in lines[0].lower():
        raise MeshError(f"{path}: not a legacy VTK file")
    if lines[3].split()[0].upper() != "ASCII":
        # lines[3] is usually ASCII/BINARY; be forgiving about position
        flat = " ".join(lines[:5]).upper()
        if "ASCII" not in flat:
            raise MeshError(f"{path}: only ASCII legacy VTK is supported")
    for line in lines[2:]:
        words.extend(line.split())

    def find(keyword):
        for i, w in enumerate(words):
            if w.upper() == keyword:
                return i
        raise MeshError(f"{path}: missing {keyword} section")

    i = find("POINTS")
    n_pts = int(words[i + 1])
    coords = np.array([float(v) for v in words[i + 3 : i + 3 + 3 * n_pts]]).reshape(n_pts, 3)

    i = find("CELLS")
    n_cells = int(words[i + 1])
    n_ints = int(words[i + 2])
    raw = [int(v) for v in words[i + 3 : i + 3 + n_ints]]
    cells = []
    k = 0
    for _ in range(n_cells):
        cnt = raw[k]
        cells.append(raw[k + 1 : k + 1 + cnt])
        k += 1 + cnt

    i = find("CELL_TYPES")
    types = [int(v) for v in words[i + 2 : i + 2 + n_cells]]

    tris = [c for c, t in zip(cells, types) if t == 5]
    tets = [c for c, t in zip(cells, types) if t == 10]
    if tets:
        elements = np.array(tets, dtype=int)
        nodes = coords
    elif tris:
        elements = np.array(tris, dtype=int)
        span = np.ptp(coords, axis=0)
        drop = int(np.argmin(span))
        keep = [k for k in range(3) if k != drop]
        nodes = coords[:, keep]
    else:
        raise MeshError(f"{path}: no triangle (5) or tetra (10) cells found")

    used = np.unique(elements)
    if used.size != nodes.shape[0]:
        remap = -np.ones(nodes.shape[0], dtype=int)
        remap[used] = np.arange(used.size)
        nodes = nodes[used]
        elements = remap[elements]

    mesh = Mesh(nodes, elements)
    boundary = sorted(mesh._boundary_face_set())
    patch = BoundaryPatch(kind="wall", faces=np.array(boundary, dtype=int))
    return Mesh(nodes, elements, {"boundary": patch})
