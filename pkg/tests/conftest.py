"""Shared fixtures: small meshes and single-threaded BLAS for determinism."""

import os

# Pin BLAS threading before numpy loads so concurrent mode solves are
# bit-reproducible regardless of pool size.
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from spectralstokes.assembly import FluidProps
from spectralstokes.mesh import Mesh, BoundaryPatch, promote_to_quadratic
from spectralstokes.structured import channel_grid


@pytest.fixture
def fluid():
    return FluidProps(density=1.0, viscosity=1.0)


@pytest.fixture
def unit_square_mesh():
    """Unit square split into two triangles, four boundary faces."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2], [0, 2, 3]])
    patches = {
        "boundary": BoundaryPatch(
            kind="wall", faces=np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
        )
    }
    return Mesh(nodes, elements, patches)


@pytest.fixture
def single_triangle_qmesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2]])
    patches = {
        "boundary": BoundaryPatch(kind="wall", faces=np.array([[0, 1], [1, 2], [2, 0]]))
    }
    return promote_to_quadratic(Mesh(nodes, elements, patches))


@pytest.fixture
def single_tet_qmesh():
    nodes = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    elements = np.array([[0, 1, 2, 3]])
    patches = {
        "boundary": BoundaryPatch(
            kind="wall",
            faces=np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]),
        )
    }
    return promote_to_quadratic(Mesh(nodes, elements, patches))


@pytest.fixture
def small_channel_qmesh():
    """Coarse channel used by solver-level tests (a few hundred dofs)."""
    return promote_to_quadratic(channel_grid(10, 4, length=4.0, half_height=1.0))
