"""Restarted GMRES over the complex field with diagonal preconditioning.

The saddle-point matrix is complex symmetric, not Hermitian, so the Arnoldi
process uses the standard conjugate inner product with no symmetry shortcut.
Convergence is steered by the preconditioned residual estimate but declared
only after the true (unpreconditioned) relative residual is re-measured.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


@dataclass
class SolverSettings:
    """Iterative solve controls: relative tolerance, restart, and preconditioner."""

    tolerance: float = 1e-6
    restart: int = 200
    max_iterations: int = 200_000
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner '{self.preconditioner}'")


@dataclass
class SolveReport:
    """Outcome of one linear solve."""

    iterations: int
    residual: float          # true relative residual ||R - A X|| / ||R||
    converged: bool
    wall_time: float
    cpu_time: float = 0.0
    residual_history: list = field(default_factory=list, repr=False)


def jacobi_precondition(system) -> np.ndarray:
    """Reciprocal-diagonal scaling vector; unit entries where the diagonal is zero.

    Accepts an assembled system (anything with a ``matrix`` attribute) or a
    sparse matrix.  The zero-diagonal pressure block maps to identity scaling.
    """
    matrix = getattr(system, "matrix", system)
    diag = matrix.diagonal().astype(complex)
    scale = np.ones_like(diag)
    nz = diag != 0.0
    scale[nz] = 1.0 / diag[nz]
    return scale


def gmres(matrix, rhs, tol=1e-6, restart=200, maxiter=200_000, scale=None, x0=None):
    """Left-preconditioned restarted GMRES; returns ``(x, iterations, history, converged)``.

    ``scale`` is the diagonal preconditioner (applied as ``scale * v``).
    ``history`` holds the per-iteration preconditioned residual estimates,
    non-increasing within each restart cycle.  Convergence means the true
    relative residual ``||rhs - A x|| / ||rhs||`` is at or below ``tol``.
    """
    n = matrix.shape[0]
    rhs = np.asarray(rhs, dtype=complex).ravel()
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros(n, dtype=complex), 0, [], True
    if scale is None:
        scale = np.ones(n, dtype=complex)

    x = np.zeros(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    target_prec = tol * np.linalg.norm(scale * rhs)

    history: list[float] = []
    total_iters = 0
    # Basis stored row-major so both Gram-Schmidt products are contiguous
    # matrix-vector calls; <q_i, w> = conj(q @ conj(w)) avoids a stored
    # conjugate copy.
    q = np.empty((restart + 1, n), dtype=complex)
    h = np.zeros((restart + 1, restart), dtype=complex)

    def _project(k, w):
        return np.conj(q[: k + 1] @ np.conj(w))

    while total_iters < maxiter:
        r = scale * (rhs - matrix @ x)
        beta = np.linalg.norm(r)
        if beta == 0.0:
            return x, total_iters, history, True
        q[0] = r / beta
        g = np.zeros(restart + 1, dtype=complex)
        g[0] = beta
        cs = np.zeros(restart, dtype=complex)
        sn = np.zeros(restart, dtype=complex)
        h[:] = 0.0

        k = 0
        breakdown = False
        while k < restart and total_iters < maxiter:
            w = scale * (matrix @ q[k])
            # Classical Gram-Schmidt with one reorthogonalization pass.
            coeffs = _project(k, w)
            w -= coeffs @ q[: k + 1]
            corr = _project(k, w)
            w -= corr @ q[: k + 1]
            coeffs += corr
            h[: k + 1, k] = coeffs
            hk = np.linalg.norm(w)
            h[k + 1, k] = hk

            # Apply accumulated Givens rotations, then generate a new one.
            for i in range(k):
                tmp = cs[i] * h[i, k] + sn[i] * h[i + 1, k]
                h[i + 1, k] = -np.conj(sn[i]) * h[i, k] + np.conj(cs[i]) * h[i + 1, k]
                h[i, k] = tmp
            denom = np.sqrt(np.abs(h[k, k]) ** 2 + np.abs(hk) ** 2)
            if denom == 0.0:
                # Zero column after orthogonalization: nothing left to add.
                breakdown = True
                total_iters += 1
                break
            cs[k] = np.conj(h[k, k]) / denom
            sn[k] = np.conj(hk) / denom
            h[k, k] = cs[k] * h[k, k] + sn[k] * hk
            h[k + 1, k] = 0.0
            g[k + 1] = -np.conj(sn[k]) * g[k]
            g[k] = cs[k] * g[k]

            total_iters += 1
            est = abs(g[k + 1])
            history.append(float(est))

            if hk <= 1e-14 * abs(beta):
                # Happy breakdown: the Krylov space is invariant, solve exactly.
                breakdown = True
                k += 1
                break
            q[k + 1] = w / hk
            k += 1
            if est <= target_prec:
                break

        if k > 0:
            y = _solve_upper(h, g, k)
            x = x + y @ q[:k]

        true_res = float(np.linalg.norm(rhs - matrix @ x) / rhs_norm)
        if true_res <= tol:
            return x, total_iters, history, True
        if breakdown:
            return x, total_iters, history, true_res <= tol
        # The inner estimate undershot the true residual; tighten and continue.
        if abs(g[k]) <= target_prec:
            target_prec *= 0.25

    return x, total_iters, history, False


def _solve_upper(h, g, k):
    return sla.solve_triangular(h[:k, :k], g[:k], lower=False, check_finite=False)


def gmres_solve(system, settings: SolverSettings, x0=None):
    """Solve an assembled system; returns ``(solution, SolveReport)``.

    ``system`` is a :class:`~spectralstokes.assembly.ComplexSaddleSystem` or a
    ``(matrix, rhs)`` pair.  Deterministic for identical inputs and settings.
    """
    if isinstance(system, tuple):
        matrix, rhs = system
        matrix = sp.csr_matrix(matrix, dtype=complex)
        true_residual = None
    else:
        matrix, rhs = system.matrix, system.rhs
        true_residual = system.residual_norm

    scale = None
    if settings.preconditioner == "jacobi":
        scale = jacobi_precondition(matrix)

    wall0 = time.perf_counter()
    cpu0 = time.thread_time()
    x, iters, history, converged = gmres(
        matrix,
        rhs,
        tol=settings.tolerance,
        restart=settings.restart,
        maxiter=settings.max_iterations,
        scale=scale,
        x0=x0,
    )
    wall = time.perf_counter() - wall0
    cpu = time.thread_time() - cpu0

    if true_residual is not None:
        res = true_residual(x)
    else:
        rn = np.linalg.norm(rhs)
        res = float(np.linalg.norm(rhs - matrix @ x) / rn) if rn > 0 else 0.0
    report = SolveReport(
        iterations=iters,
        residual=res,
        converged=bool(converged and res <= settings.tolerance),
        wall_time=wall,
        cpu_time=cpu,
        residual_history=history,
    )
    return x, report
