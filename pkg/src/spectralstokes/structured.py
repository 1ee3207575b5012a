"""Regular benchmark grids for the validation geometries.

These builders produce the channel and pipe meshes used by the test and
acceptance suites; production meshes come from external generators through
:func:`spectralstokes.mesh.load_mesh`.
"""

from __future__ import annotations

import numpy as np

from .mesh import BoundaryGeometry, BoundaryPatch, CylinderBoundary, Mesh


def channel_grid(nx: int, ny: int, length: float = 10.0, half_height: float = 1.0) -> Mesh:
    """Structured triangle mesh of ``[0, L] x [-H, H]``.

    Patches: ``inlet`` (x=0, neumann), ``outlet`` (x=L, neumann), ``walls``
    (y = +-H, wall).  Each grid cell splits into two positively oriented
    triangles.
    """
    if nx < 1 or ny < 1:
        raise ValueError("need at least one cell per direction")
    x = np.linspace(0.0, length, nx + 1)
    y = np.linspace(-half_height, half_height, ny + 1)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    elements = []
    for i in range(nx):
        for j in range(ny):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    elements = np.asarray(elements, dtype=int)

    inlet = np.array([(nid(0, j + 1), nid(0, j)) for j in range(ny)], dtype=int)
    outlet = np.array([(nid(nx, j), nid(nx, j + 1)) for j in range(ny)], dtype=int)
    walls = np.array(
        [(nid(i, 0), nid(i + 1, 0)) for i in range(nx)]
        + [(nid(i + 1, ny), nid(i, ny)) for i in range(nx)],
        dtype=int,
    )
    patches = {
        "inlet": BoundaryPatch(kind="neumann", faces=inlet),
        "outlet": BoundaryPatch(kind="neumann", faces=outlet),
        "walls": BoundaryPatch(kind="wall", faces=walls),
    }
    return Mesh(nodes, elements, patches)


def _disk_points(n_rings: int, radius: float):
    """Concentric-ring disk layout: ring k holds 6k points."""
    pts = [(0.0, 0.0)]
    for k in range(1, n_rings + 1):
        r = radius * k / n_rings
        for m in range(6 * k):
            a = 2.0 * np.pi * m / (6 * k)
            pts.append((r * np.cos(a), r * np.sin(a)))
    return np.asarray(pts)


def _ring_start(k: int) -> int:
    # index of the first point of ring k (ring 0 is the center point)
    return 1 + 3 * k * (k - 1) if k >= 1 else 0


def _disk_triangles(n_rings: int):
    """Fan triangulation between consecutive rings: 6(2k-1) triangles at ring k."""
    tris = []
    for k in range(1, n_rings + 1):
        outer = _ring_start(k)
        n_out = 6 * k
        if k == 1:
            for m in range(6):
                tris.append((0, outer + m, outer + (m + 1) % 6))
            continue
        inner = _ring_start(k - 1)
        n_in = 6 * (k - 1)
        # Walk both rings sector by sector; each sector spans k outer and
        # k-1 inner intervals.
        for s in range(6):
            o0 = s * k
            i0 = s * (k - 1)
            oi, ii = 0, 0
            while oi < k or ii < k - 1:
                o_a = outer + (o0 + oi) % n_out
                i_a = inner + (i0 + ii) % n_in
                take_outer = oi < k and (
                    ii >= k - 1 or (oi + 0.5) / k <= (ii + 0.5) / (k - 1)
                )
                if take_outer:
                    o_b = outer + (o0 + oi + 1) % n_out
                    tris.append((i_a, o_a, o_b))
                    oi += 1
                else:
                    i_b = inner + (i0 + ii + 1) % n_in
                    tris.append((i_a, o_a, i_b))
                    ii += 1
    return np.asarray(tris, dtype=int)


def _split_prism(bottom, top):
    """Split a prism into 3 tetrahedra with face-local diagonal choices.

    Every quad face takes the diagonal through its smallest global vertex
    index, so neighboring prisms always agree on shared faces.
    """
    v = list(bottom) + list(top)
    imin = v.index(min(v))
    if imin >= 3:
        # Turn the prism upside down (orientation-preserving relabeling).
        bottom, top = (v[3], v[5], v[4]), (v[0], v[2], v[1])
        v = list(bottom) + list(top)
        imin = v.index(min(v))
    b = [bottom[(imin + k) % 3] for k in range(3)]
    t = [top[(imin + k) % 3] for k in range(3)]
    # b[0] is the global minimum: its two quads cut through b[0]; the third
    # quad (b1 b2 t2 t1) picks the diagonal with the smaller corner.
    if min(b[1], t[2]) < min(b[2], t[1]):
        return [
            (b[0], b[1], b[2], t[2]),
            (b[0], b[1], t[2], t[1]),
            (b[0], t[1], t[2], t[0]),
        ]
    return [
        (b[0], b[1], b[2], t[1]),
        (b[0], t[1], b[2], t[2]),
        (b[0], t[1], t[2], t[0]),
    ]


def pipe_grid(n_rings: int, n_layers: int, radius: float = 1.0, length: float = 3.0):
    """Tetrahedral pipe mesh along +z with a cylindrical wall descriptor.

    Returns ``(mesh, geometry)``; patches are ``inlet`` (z=0, neumann),
    ``outlet`` (z=L, neumann), and the curved ``wall``.
    """
    if n_rings < 1 or n_layers < 1:
        raise ValueError("need at least one ring and one layer")
    disk = _disk_points(n_rings, radius)
    tris = _disk_triangles(n_rings)
    n_disk = disk.shape[0]
    z = np.linspace(0.0, length, n_layers + 1)
    nodes = np.vstack([
        np.column_stack([disk[:, 0], disk[:, 1], np.full(n_disk, zz)]) for zz in z
    ])

    tets = []
    for layer in range(n_layers):
        off_b = layer * n_disk
        off_t = (layer + 1) * n_disk
        for tri in tris:
            bottom = tuple(off_b + v for v in tri)
            top = tuple(off_t + v for v in tri)
            tets.extend(_split_prism(bottom, top))
    tets = np.asarray(tets, dtype=int)

    # Fix orientation: swap two vertices of negative-volume tets.
    p = nodes[tets]
    vol = np.einsum(
        "ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), p[:, 3] - p[:, 0]
    )
    flip = vol < 0
    tets[flip, 0], tets[flip, 1] = tets[flip, 1].copy(), tets[flip, 0].copy()

    inlet = tris[:, ::-1].copy()                       # z=0 disk, outward normal -z
    outlet = tris + n_layers * n_disk                  # z=L disk, outward normal +z
    ring0 = _ring_start(n_rings)
    n_out = 6 * n_rings
    wall = []
    for layer in range(n_layers):
        off_b = layer * n_disk
        off_t = (layer + 1) * n_disk
        for m in range(n_out):
            a = ring0 + m
            b = ring0 + (m + 1) % n_out
            quad = (off_b + a, off_b + b, off_t + b, off_t + a)
            # Diagonal matching the prism split: smaller global index wins.
            if min(quad[0], quad[2]) < min(quad[1], quad[3]):
                wall.append((quad[0], quad[1], quad[2]))
                wall.append((quad[0], quad[2], quad[3]))
            else:
                wall.append((quad[0], quad[1], quad[3]))
                wall.append((quad[1], quad[2], quad[3]))
    wall = np.asarray(wall, dtype=int)

    patches = {
        "inlet": BoundaryPatch(kind="neumann", faces=inlet),
        "outlet": BoundaryPatch(kind="neumann", faces=outlet),
        "wall": BoundaryPatch(kind="wall", faces=wall),
    }
    mesh = Mesh(nodes, tets, patches)
    geom = BoundaryGeometry(
        surfaces={"wall": CylinderBoundary(point=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0), radius=radius)}
    )
    return mesh, geom
