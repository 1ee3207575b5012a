"""Quadratic/linear simplex shape functions and complex saddle-point assembly.

The per-frequency system has the block form ``[[K, D], [D^T, 0]]`` with
``K = j*omega*rho*M + mu*S`` acting on interleaved velocity components and
``D`` coupling velocity to vertex pressures.  Dirichlet velocities are
eliminated: their columns multiply the prescribed values and fold into the
right-hand side, and their rows are dropped from the unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import MeshError
from .mesh import QuadraticMesh

_CHUNK = 4096  # elements per assembly batch, bounds scratch memory


@dataclass
class FluidProps:
    """Newtonian fluid constants: density and dynamic viscosity."""

    density: float
    viscosity: float

    def __post_init__(self):
        if self.density <= 0 or self.viscosity <= 0:
            raise ValueError("density and viscosity must be positive")

    @property
    def kinematic_viscosity(self) -> float:
        return self.viscosity / self.density


@dataclass
class ShapeSet:
    """Reference-simplex shape values, gradients, and quadrature weights."""

    points: np.ndarray       # (nq, dim)
    weights: np.ndarray      # (nq,), sums to the reference measure
    vel_values: np.ndarray   # (nq, n_vel) quadratic basis
    vel_grads: np.ndarray    # (nq, n_vel, dim)
    pres_values: np.ndarray  # (nq, n_pres) linear basis


def _tri_quadrature():
    # 6-point degree-4 rule; weights normalized to the reference area 1/2.
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    bary = [
        (1 - 2 * a1, a1, a1), (a1, 1 - 2 * a1, a1), (a1, a1, 1 - 2 * a1),
        (1 - 2 * a2, a2, a2), (a2, 1 - 2 * a2, a2), (a2, a2, 1 - 2 * a2),
    ]
    pts = np.array([(b[1], b[2]) for b in bary])
    wts = 0.5 * np.array([w1, w1, w1, w2, w2, w2])
    return pts, wts


def _tet_quadrature():
    # 11-point degree-4 rule (includes a negative centroid weight);
    # weights normalized to the reference volume 1/6.
    s = np.sqrt(5.0 / 14.0)
    a = (1.0 + s) / 4.0
    b = (1.0 - s) / 4.0
    bary = [(0.25, 0.25, 0.25, 0.25)]
    wts = [-74.0 / 5625.0]
    g = 1.0 / 14.0
    for i in range(4):
        p = [g] * 4
        p[i] = 11.0 / 14.0
        bary.append(tuple(p))
        wts.append(343.0 / 45000.0)
    for i in range(4):
        for j in range(i + 1, 4):
            p = [b] * 4
            p[i] = a
            p[j] = a
            bary.append(tuple(p))
            wts.append(56.0 / 2250.0)
    pts = np.array([(p[1], p[2], p[3]) for p in bary])
    return pts, np.array(wts)


def _barycentric(points, dim):
    lam0 = 1.0 - points.sum(axis=1)
    return np.column_stack([lam0, points])


def _p2_basis(points, dim):
    """Quadratic Lagrange basis and gradients, VTK node order."""
    lam = _barycentric(points, dim)
    grad_lam = np.vstack([-np.ones(dim), np.eye(dim)])  # (dim+1, dim)
    edges = ((0, 1), (1, 2), (2, 0)) if dim == 2 else (
        (0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3))
    nq = points.shape[0]
    nv = (dim + 1) + len(edges)
    vals = np.empty((nq, nv))
    grads = np.empty((nq, nv, dim))
    for i in range(dim + 1):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * grad_lam[i]
    for k, (i, j) in enumerate(edges):
        vals[:, dim + 1 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, dim + 1 + k, :] = 4.0 * (
            lam[:, i][:, None] * grad_lam[j] + lam[:, j][:, None] * grad_lam[i]
        )
    return vals, grads


def reference_shapes(dim: int, quadrature_order: int = 4) -> ShapeSet:
    """Tabulate P2 velocity and P1 pressure bases at a degree-4 quadrature.

    Only ``quadrature_order == 4`` is provided (exact for every product of
    quadratic bases on affine elements); other orders raise ``ValueError``.
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if quadrature_order != 4:
        raise ValueError(f"unsupported quadrature order {quadrature_order} (only 4)")
    pts, wts = _tri_quadrature() if dim == 2 else _tet_quadrature()
    vel_vals, vel_grads = _p2_basis(pts, dim)
    pres_vals = _barycentric(pts, dim)
    return ShapeSet(pts, wts, vel_vals, vel_grads, pres_vals)


def _edge_shapes():
    """P2 shapes on a straight edge, 3-point Gauss (nodes: end, end, mid)."""
    g = np.sqrt(3.0 / 5.0)
    t = 0.5 * np.array([1 - g, 1.0, 1 + g])
    w = np.array([5.0, 8.0, 5.0]) / 18.0
    vals = np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])
    return t, w, vals


def _face_tri_shapes():
    """P2 shapes on a triangular face (nodes: v0 v1 v2 m01 m12 m20)."""
    pts, wts = _tri_quadrature()
    vals, _ = _p2_basis(pts, 2)
    return pts, wts, vals


# ---------------------------------------------------------------------------
# Element geometry
# ---------------------------------------------------------------------------

def _element_geometry(qmesh: QuadraticMesh):
    """Constant Jacobian data per (affine) element: |det J| and J^{-1}."""
    verts = qmesh.vertex_nodes()[qmesh.elements]          # (ne, dim+1, dim)
    jac = np.swapaxes(verts[:, 1:] - verts[:, :1], 1, 2)  # columns are edge vectors
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < 1e-300) or not np.all(np.isfinite(det)):
        raise MeshError("degenerate element Jacobian during assembly")
    inv = np.linalg.inv(jac)
    return np.abs(det), inv


def _scatter(rows, cols, vals, shape):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def assemble_mass_scalar(qmesh: QuadraticMesh, coeff: float = 1.0) -> sp.csr_matrix:
    """Scalar velocity mass matrix ``coeff * integral(M_A M_B)``."""
    shapes = reference_shapes(qmesh.dim)
    ref = np.einsum("q,qa,qb->ab", shapes.weights, shapes.vel_values, shapes.vel_values)
    det, _ = _element_geometry(qmesh)
    conn = qmesh.vel_conn
    vals = coeff * det[:, None, None] * ref[None, :, :]
    rows = np.repeat(conn[:, :, None], conn.shape[1], axis=2)
    cols = np.repeat(conn[:, None, :], conn.shape[1], axis=1)
    n = qmesh.n_velocity_nodes
    return _scatter(rows, cols, vals, (n, n))


def assemble_stiffness_scalar(qmesh: QuadraticMesh, mu: float = 1.0) -> sp.csr_matrix:
    """Scalar stiffness ``mu * integral(grad M_A . grad M_B)``."""
    shapes = reference_shapes(qmesh.dim)
    sref = np.einsum("q,qam,qbn->abmn", shapes.weights, shapes.vel_grads, shapes.vel_grads)
    det, inv = _element_geometry(qmesh)
    metric = np.einsum("emk,enk->emn", inv, inv)  # J^{-1} J^{-T}
    vals = mu * det[:, None, None] * np.einsum("abmn,emn->eab", sref, metric)
    conn = qmesh.vel_conn
    rows = np.repeat(conn[:, :, None], conn.shape[1], axis=2)
    cols = np.repeat(conn[:, None, :], conn.shape[1], axis=1)
    n = qmesh.n_velocity_nodes
    return _scatter(rows, cols, vals, (n, n))


def assemble_stiffness(qmesh: QuadraticMesh, mu: float, form: str = "full") -> sp.csr_matrix:
    """Interleaved viscous block for the full or symmetric gradient form.

    ``full`` is ``mu * grad(w) : grad(u)`` (component-diagonal); ``symmetric``
    is ``mu * grad(w) : (grad(u) + grad(u)^T)``, coupling components.
    """
    dim = qmesh.dim
    scal = assemble_stiffness_scalar(qmesh, mu)
    if form == "full":
        return sp.kron(scal, sp.eye(dim), format="csr")
    if form != "symmetric":
        raise ValueError(f"unknown viscous form '{form}'")

    shapes = reference_shapes(dim)
    sref = np.einsum("q,qam,qbn->abmn", shapes.weights, shapes.vel_grads, shapes.vel_grads)
    det, inv = _element_geometry(qmesh)
    conn = qmesh.vel_conn
    nv = conn.shape[1]
    n = qmesh.n_velocity_nodes * dim
    blocks = [sp.kron(scal, sp.eye(dim), format="csr")]
    rows_l, cols_l, vals_l = [], [], []
    for start in range(0, qmesh.n_elements, _CHUNK):
        sl = slice(start, start + _CHUNK)
        # C[(A,i),(B,j)] = mu * |J| * sref[a,b,m,n] * inv[m,j] * inv[n,i]
        c = np.einsum("abmn,emj,eni->eaibj", sref, inv[sl], inv[sl], optimize=True)
        c *= mu * det[sl][:, None, None, None, None]
        dofs = (conn[sl][:, :, None] * dim + np.arange(dim)[None, None, :]).reshape(-1, nv * dim)
        rows_l.append(np.repeat(dofs[:, :, None], nv * dim, axis=2).ravel())
        cols_l.append(np.repeat(dofs[:, None, :], nv * dim, axis=1).ravel())
        vals_l.append(c.reshape(-1))
    blocks.append(
        sp.coo_matrix(
            (np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
            shape=(n, n),
        ).tocsr()
    )
    return (blocks[0] + blocks[1]).tocsr()


def assemble_divergence(qmesh: QuadraticMesh) -> sp.csr_matrix:
    """Velocity-pressure coupling ``D[(A,d),B] = -integral(dM_A/dx_d N_B)``."""
    dim = qmesh.dim
    shapes = reference_shapes(dim)
    tref = np.einsum("q,qam,qb->amb", shapes.weights, shapes.vel_grads, shapes.pres_values)
    det, inv = _element_geometry(qmesh)
    # d[e,a,d,b] = -|J| * tref[a,m,b] * inv[e,m,d]
    vals = -np.einsum("amb,emd,e->eadb", tref, inv, det, optimize=True)
    vc = qmesh.vel_conn
    pc = qmesh.pres_conn
    nv, npr = vc.shape[1], pc.shape[1]
    rows = (vc[:, :, None] * dim + np.arange(dim)[None, None, :]).reshape(len(vc), nv * dim)
    rows = np.repeat(rows[:, :, None], npr, axis=2)
    cols = np.repeat(pc[:, None, :], nv * dim, axis=1)
    return _scatter(rows, cols, vals, (qmesh.n_velocity_nodes * dim, qmesh.n_vertices))


def boundary_traction_load(qmesh: QuadraticMesh, patch: str, h_mode) -> np.ndarray:
    """Consistent surface load for traction data on a Neumann patch.

    ``h_mode`` is a uniform complex vector ``(dim,)``, per-face values
    ``(n_faces, dim)``, or nodal values ``(n_velocity_nodes, dim)``.
    Returns the complex nodal load array ``(n_velocity_nodes, dim)``.
    """
    try:
        pdata = qmesh.boundary_patches[patch]
    except KeyError:
        raise MeshError(f"unknown boundary patch '{patch}'") from None
    if pdata.kind != "neumann":
        raise MeshError(f"patch '{patch}' is {pdata.kind}, not neumann")
    return _surface_load(qmesh, pdata, h_mode)


def _surface_load(qmesh, pdata, h_mode):
    dim = qmesh.dim
    conn = pdata.face_conn
    n_faces = conn.shape[0]
    load = np.zeros((qmesh.n_velocity_nodes, dim), dtype=complex)
    if n_faces == 0:
        return load

    h_mode = np.asarray(h_mode, dtype=complex)
    if h_mode.shape == (dim,):
        face_h = np.broadcast_to(h_mode, (n_faces, dim))
        nodal = None
    elif h_mode.shape == (n_faces, dim):
        face_h = h_mode
        nodal = None
    elif h_mode.shape == (qmesh.n_velocity_nodes, dim):
        face_h = None
        nodal = h_mode
    else:
        raise ValueError(f"traction data shape {h_mode.shape} does not match patch or mesh")

    if dim == 2:
        _, w, vals = _edge_shapes()
        p0 = qmesh.nodes[conn[:, 0]]
        p1 = qmesh.nodes[conn[:, 1]]
        jac_s = np.linalg.norm(p1 - p0, axis=1)
    else:
        _, w, vals = _face_tri_shapes()
        p0 = qmesh.nodes[conn[:, 0]]
        e1 = qmesh.nodes[conn[:, 1]] - p0
        e2 = qmesh.nodes[conn[:, 2]] - p0
        jac_s = np.linalg.norm(np.cross(e1, e2), axis=1)

    if nodal is None:
        ref_int = w @ vals                             # integral of each face shape
        contrib = (jac_s[:, None, None] * ref_int[None, :, None]) * face_h[:, None, :]
    else:
        hq = np.einsum("qa,fad->fqd", vals, nodal[conn])
        contrib = jac_s[:, None, None] * np.einsum("q,qa,fqd->fad", w, vals, hq)
    np.add.at(load, conn.ravel(), contrib.reshape(-1, dim))
    return load


# ---------------------------------------------------------------------------
# Mode system
# ---------------------------------------------------------------------------

@dataclass
class ComplexSaddleSystem:
    """Reduced complex saddle-point system with Dirichlet data folded in."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    omega: float
    vel_dof: np.ndarray          # (n_vel_nodes, dim) reduced dof index or -1
    pres_dof: np.ndarray         # (n_vertices,) reduced dof index or -1
    dirichlet_values: np.ndarray  # (n_vel_nodes, dim) complex, zero where free
    constrained_rows: sp.csr_matrix = field(repr=False)
    constrained_rhs: np.ndarray = field(repr=False)
    pinned_pressure: bool = False

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_velocity_dofs(self) -> int:
        return int((self.vel_dof >= 0).sum())

    @property
    def n_pressure_dofs(self) -> int:
        return int((self.pres_dof >= 0).sum())

    def expand(self, x: np.ndarray):
        """Reduced solution vector -> nodal velocity and pressure arrays."""
        u = self.dirichlet_values.astype(complex).copy()
        mask = self.vel_dof >= 0
        u[mask] = x[self.vel_dof[mask]]
        p = np.zeros(self.pres_dof.shape[0], dtype=complex)
        pmask = self.pres_dof >= 0
        p[pmask] = x[self.pres_dof[pmask]]
        return u, p

    def flatten(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Nodal fields -> reduced solution vector (inverse of :meth:`expand`)."""
        x = np.zeros(self.n_dofs, dtype=complex)
        mask = self.vel_dof >= 0
        x[self.vel_dof[mask]] = u[mask]
        pmask = self.pres_dof >= 0
        x[self.pres_dof[pmask]] = p[pmask]
        return x

    def residual_norm(self, x: np.ndarray) -> float:
        """True relative residual of the reduced system at ``x``."""
        rn = np.linalg.norm(self.rhs)
        if rn == 0.0:
            return float(np.linalg.norm(self.matrix @ x))
        return float(np.linalg.norm(self.rhs - self.matrix @ x) / rn)

    def reaction_forces(self, x: np.ndarray) -> np.ndarray:
        """Nodal forces on constrained velocity dofs (rows dropped from the system)."""
        full = self._full_vector(x)
        return np.asarray(self.constrained_rows @ full - self.constrained_rhs)

    def _full_vector(self, x):
        u, p = self.expand(x)
        return np.concatenate([u.ravel(), p])

    def export_matrix(self, path) -> None:
        """Coordinate-list text dump ``row col re im`` for debugging."""
        coo = self.matrix.tocoo()
        with open(Path(path), "w") as fh:
            fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def dirichlet_values_from_patches(qmesh: QuadraticMesh, patch_values: dict) -> np.ndarray:
    """Uniform per-patch velocity vectors -> nodal Dirichlet array."""
    g = np.zeros((qmesh.n_velocity_nodes, qmesh.dim), dtype=complex)
    for name, vec in patch_values.items():
        pdata = qmesh.boundary_patches[name]
        nodes = np.unique(pdata.face_conn)
        g[nodes] = np.asarray(vec, dtype=complex)
    return g


def constrained_velocity_nodes(qmesh: QuadraticMesh) -> np.ndarray:
    """Velocity nodes on dirichlet or wall patches (all components constrained)."""
    nodes = []
    for pdata in qmesh.boundary_patches.values():
        if pdata.kind in ("dirichlet", "wall"):
            nodes.append(pdata.face_conn.ravel())
    if not nodes:
        return np.empty(0, dtype=int)
    return np.unique(np.concatenate(nodes))


def assemble_mode_system(
    qmesh: QuadraticMesh,
    props: FluidProps,
    omega: float,
    g_mode=None,
    h_mode=None,
    viscous_form: str = "full",
) -> ComplexSaddleSystem:
    """Assemble the complex system for one frequency.

    ``g_mode`` holds complex Dirichlet velocities: either a full nodal array
    ``(n_velocity_nodes, dim)`` or a ``{patch: vector}`` mapping (wall patches
    are implicitly zero).  ``h_mode`` maps Neumann patch names to complex
    traction vectors.  ``omega=0`` yields a purely real steady Stokes system.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    dim = qmesh.dim
    n_vn = qmesh.n_velocity_nodes
    n_p = qmesh.n_vertices

    stiff = assemble_stiffness(qmesh, props.viscosity, viscous_form)
    a_vv = stiff.astype(complex)
    if omega > 0.0:
        mass = sp.kron(assemble_mass_scalar(qmesh, props.density), sp.eye(dim), format="csr")
        a_vv = a_vv + (1j * omega) * mass
    div = assemble_divergence(qmesh).astype(complex)
    a_full = sp.bmat([[a_vv, div], [div.T, None]], format="csr")

    load = np.zeros((n_vn, dim), dtype=complex)
    neumann = [n for n, p in qmesh.boundary_patches.items() if p.kind == "neumann"]
    h_mode = h_mode or {}
    for name, data in h_mode.items():
        load += boundary_traction_load(qmesh, name, data)
    rhs_full = np.concatenate([load.ravel(), np.zeros(n_p, dtype=complex)])

    if g_mode is None:
        g = np.zeros((n_vn, dim), dtype=complex)
    elif isinstance(g_mode, dict):
        g = dirichlet_values_from_patches(qmesh, g_mode)
    else:
        g = np.asarray(g_mode, dtype=complex)
        if g.shape != (n_vn, dim):
            raise ValueError(f"g_mode shape {g.shape} != ({n_vn}, {dim})")

    fixed_nodes = constrained_velocity_nodes(qmesh)
    fixed_mask = np.zeros(n_vn, dtype=bool)
    fixed_mask[fixed_nodes] = True
    free_nodes_outside = np.nonzero(~fixed_mask)[0]
    if np.any(g[free_nodes_outside] != 0):
        raise ValueError("g_mode has nonzero values on nodes that are not Dirichlet-constrained")

    vel_dof = -np.ones((n_vn, dim), dtype=int)
    free_v = np.nonzero(~fixed_mask)[0]
    n_free_v = free_v.size * dim
    vel_dof[free_v] = np.arange(n_free_v).reshape(-1, dim)

    # Pure-Dirichlet case: pin one pressure dof to remove the constant mode.
    pinned = not any(qmesh.boundary_patches[n].faces.size for n in neumann)
    pres_dof = -np.ones(n_p, dtype=int)
    first_free_p = 1 if pinned else 0
    pres_dof[first_free_p:] = np.arange(n_free_v, n_free_v + n_p - first_free_p)

    pres_idx_full = n_vn * dim + np.arange(n_p)
    free_idx = np.concatenate([
        (free_v[:, None] * dim + np.arange(dim)[None, :]).ravel(),
        pres_idx_full[first_free_p:],
    ])
    fixed_idx = (fixed_nodes[:, None] * dim + np.arange(dim)[None, :]).ravel()
    g_fixed = g[fixed_nodes].ravel()
    if pinned:
        fixed_idx = np.concatenate([fixed_idx, pres_idx_full[:1]])
        g_fixed = np.concatenate([g_fixed, [0.0]])

    a_free = a_full[free_idx]
    rhs = np.asarray(rhs_full[free_idx] - a_free[:, fixed_idx] @ g_fixed)
    matrix = a_free[:, free_idx].tocsr()

    g_store = np.zeros((n_vn, dim), dtype=complex)
    g_store[fixed_nodes] = g[fixed_nodes]

    return ComplexSaddleSystem(
        matrix=matrix,
        rhs=rhs,
        omega=float(omega),
        vel_dof=vel_dof,
        pres_dof=pres_dof,
        dirichlet_values=g_store,
        constrained_rows=a_full[fixed_idx].tocsr(),
        constrained_rhs=np.asarray(rhs_full[fixed_idx]),
        pinned_pressure=pinned,
    )


def interpolate_at_quadrature(qmesh: QuadraticMesh, nodal):
    """Velocity nodal values -> values at element quadrature points.

    Returns ``(coords, values, weights)`` where ``weights`` already include
    the element Jacobians, so ``sum(weights * f(coords))`` integrates over the
    mesh.  ``nodal`` has shape ``(n_velocity_nodes, ...)``.
    """
    shapes = reference_shapes(qmesh.dim)
    det, _ = _element_geometry(qmesh)
    verts = qmesh.vertex_nodes()[qmesh.elements]
    lam = _barycentric(shapes.points, qmesh.dim)
    coords = np.einsum("qv,evd->eqd", lam, verts)
    vals = np.einsum("qa,ea...->eq...", shapes.vel_values, np.asarray(nodal)[qmesh.vel_conn])
    w = det[:, None] * shapes.weights[None, :]
    return coords, vals, w
