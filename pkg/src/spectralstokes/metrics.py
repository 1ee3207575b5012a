"""Field error norms, boundary flow rates, and log-log slope fits."""

from __future__ import annotations

import numpy as np

from .assembly import _edge_shapes, _face_tri_shapes, interpolate_at_quadrature
from .errors import MeshError
from .mesh import QuadraticMesh


def l2_norm(nodal, qmesh: QuadraticMesh) -> float:
    """L2(Omega) norm of a nodal velocity-space field (vector or scalar)."""
    _, vals, w = interpolate_at_quadrature(qmesh, nodal)
    sq = np.abs(vals) ** 2
    if sq.ndim == 3:
        sq = sq.sum(axis=2)
    return float(np.sqrt(np.sum(w * sq)))


def field_error(nodal, oracle, qmesh: QuadraticMesh) -> float:
    """Relative L2(Omega) difference between a nodal field and a point oracle.

    ``oracle`` maps quadrature-point coordinates ``(m, dim)`` to field values
    with the same trailing shape as the nodal data.  The oracle is evaluated
    at quadrature points rather than nodes to avoid nodal superconvergence.
    """
    coords, vals, w = interpolate_at_quadrature(qmesh, nodal)
    flat = coords.reshape(-1, coords.shape[-1])
    exact = np.asarray(oracle(flat)).reshape(vals.shape)
    diff = np.abs(vals - exact) ** 2
    ref = np.abs(exact) ** 2
    if diff.ndim == 3:
        diff = diff.sum(axis=2)
        ref = ref.sum(axis=2)
    denom = np.sum(w * ref)
    if denom <= 0.0:
        raise ZeroDivisionError("field_error: reference field has zero norm")
    return float(np.sqrt(np.sum(w * diff) / denom))


def _patch_face_frames(qmesh: QuadraticMesh, patch: str):
    """Outward unit normal and surface Jacobian per face of a boundary patch."""
    try:
        pdata = qmesh.boundary_patches[patch]
    except KeyError:
        raise MeshError(f"unknown boundary patch '{patch}'") from None
    faces = pdata.faces
    dim = qmesh.dim

    owner = {}
    local = ((0, 1), (1, 2), (2, 0)) if dim == 2 else ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))
    wanted = {tuple(sorted(f)) for f in faces}
    for eid, elem in enumerate(qmesh.elements):
        for loc in local:
            key = tuple(sorted(elem[list(loc)]))
            if key in wanted:
                owner[key] = eid

    verts = qmesh.vertex_nodes()
    normals = np.empty((len(faces), dim))
    jac = np.empty(len(faces))
    for i, f in enumerate(faces):
        p = verts[f]
        if dim == 2:
            t = p[1] - p[0]
            n = np.array([t[1], -t[0]])
            jac[i] = np.linalg.norm(t)
        else:
            n = np.cross(p[1] - p[0], p[2] - p[0])
            jac[i] = np.linalg.norm(n)
        n = n / np.linalg.norm(n)
        eid = owner[tuple(sorted(f))]
        centroid = verts[qmesh.elements[eid]].mean(axis=0)
        if np.dot(n, p.mean(axis=0) - centroid) < 0:
            n = -n
        normals[i] = n
    return pdata, normals, jac


def flow_rate(nodal, qmesh: QuadraticMesh, patch: str):
    """Flux ``integral(u . n)`` of a nodal velocity field through a patch."""
    pdata, normals, jac = _patch_face_frames(qmesh, patch)
    nodal = np.asarray(nodal)
    if qmesh.dim == 2:
        _, w, vals = _edge_shapes()
    else:
        _, w, vals = _face_tri_shapes()
    face_vals = nodal[pdata.face_conn]                  # (nf, n_face_nodes, dim)
    uq = np.einsum("qa,fad->fqd", vals, face_vals)      # values at face quad points
    un = np.einsum("fqd,fd->fq", uq, normals)
    total = np.einsum("fq,q,f->", un, w, jac)
    return complex(total) if np.iscomplexobj(nodal) else float(total)


def patch_area(qmesh: QuadraticMesh, patch: str) -> float:
    """Measure of a boundary patch (length in 2D, area in 3D)."""
    _, _, jac = _patch_face_frames(qmesh, patch)
    if qmesh.dim == 2:
        return float(jac.sum())        # jac is the edge length
    return float(0.5 * jac.sum())      # jac is twice the triangle area


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
