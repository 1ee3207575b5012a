"""Text formats: waveform files, field snapshots, and legacy-VTK output.

All floating-point output uses 17 significant digits so native-format files
round-trip bit-exactly through their readers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import QuadraticMesh
from .spectral import BoundaryWaveform

_FMT = "{:.17g}"


def _fmt(*vals) -> str:
    return " ".join(_FMT.format(float(v)) for v in vals)


# ---------------------------------------------------------------------------
# Waveforms: `samples` rows of `t value`, or `modes` rows of `mode re im`.
# ---------------------------------------------------------------------------

def read_waveform(path, patch: str, kind: str, direction, period: float | None = None,
                  area: float = 1.0) -> BoundaryWaveform:
    """Read a waveform file; mode files need the case ``period``, sample files imply it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"waveform file not found: {path}")
    rows = []
    tag = None
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if tag is None:
                tag = line.lower()
                if tag not in ("samples", "modes"):
                    raise ConfigError(f"{path}: first line must be 'samples' or 'modes', got '{line}'")
                continue
            rows.append([float(v) for v in line.split()])
    if tag is None or not rows:
        raise ConfigError(f"{path}: empty waveform file")
    data = np.asarray(rows)
    if tag == "samples":
        if data.shape[1] != 2:
            raise ConfigError(f"{path}: sample rows must be 't value'")
        return BoundaryWaveform.from_samples(patch, kind, direction, data[:, 0], data[:, 1], area=area)
    if data.shape[1] != 3:
        raise ConfigError(f"{path}: mode rows must be 'mode re im'")
    if period is None:
        raise ConfigError(f"{path}: a mode-coefficient waveform needs the case period")
    order = np.argsort(data[:, 0])
    data = data[order]
    modes = data[:, 0].astype(int)
    if np.any(modes != np.arange(modes.size)):
        raise ConfigError(f"{path}: mode indices must be consecutive from 0")
    coeffs = data[:, 1] + 1j * data[:, 2]
    return BoundaryWaveform(
        patch=patch, kind=kind, direction=direction, period=float(period),
        coefficients=coeffs, area=area,
    )


def write_waveform_samples(path, times, values) -> None:
    with open(Path(path), "w") as fh:
        fh.write("samples\n")
        for t, v in zip(times, values):
            fh.write(_fmt(t, v) + "\n")


def write_waveform_modes(path, coefficients) -> None:
    with open(Path(path), "w") as fh:
        fh.write("modes\n")
        for i, c in enumerate(np.asarray(coefficients, dtype=complex)):
            fh.write(f"{i} " + _fmt(c.real, c.imag) + "\n")


# ---------------------------------------------------------------------------
# Field snapshots
# ---------------------------------------------------------------------------

def write_field_snapshot(path, qmesh: QuadraticMesh, velocity, pressure,
                         fmt: str = "native", time: float | None = None) -> None:
    """Write a real nodal field in the native text format or legacy VTK."""
    velocity = np.asarray(velocity, dtype=float)
    pressure = np.asarray(pressure, dtype=float)
    if velocity.shape != (qmesh.n_velocity_nodes, qmesh.dim):
        raise ValueError(f"velocity shape {velocity.shape} does not match the mesh")
    if pressure.shape != (qmesh.n_vertices,):
        raise ValueError(f"pressure shape {pressure.shape} does not match the mesh")
    if fmt == "native":
        _write_native_snapshot(path, qmesh, velocity, pressure, time)
    elif fmt == "vtk":
        write_vtk_snapshot(path, qmesh, velocity, pressure)
    else:
        raise ValueError(f"unknown snapshot format '{fmt}'")


def _write_native_snapshot(path, qmesh, velocity, pressure, time):
    dim = qmesh.dim
    with open(Path(path), "w") as fh:
        t = 0.0 if time is None else time
        fh.write(f"snapshot {dim} {qmesh.n_velocity_nodes} {qmesh.n_vertices} " + _fmt(t) + "\n")
        fh.write("velocity\n")
        for x, v in zip(qmesh.nodes, velocity):
            fh.write(_fmt(*x, *v) + "\n")
        fh.write("pressure\n")
        for p in pressure:
            fh.write(_fmt(p) + "\n")


def read_field_snapshot(path):
    """Read a native snapshot; returns ``(coords, velocity, pressure, time)``."""
    path = Path(path)
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 5 or head[0] != "snapshot":
            raise ConfigError(f"{path}: not a native snapshot file")
        dim, n_v, n_p = int(head[1]), int(head[2]), int(head[3])
        time = float(head[4])
        if fh.readline().strip() != "velocity":
            raise ConfigError(f"{path}: missing velocity block")
        rows = [fh.readline().split() for _ in range(n_v)]
        data = np.asarray(rows, dtype=float)
        coords, velocity = data[:, :dim], data[:, dim:]
        if fh.readline().strip() != "pressure":
            raise ConfigError(f"{path}: missing pressure block")
        pressure = np.asarray([float(fh.readline()) for _ in range(n_p)])
    return coords, velocity, pressure, time


_VTK_CELL = {2: 22, 3: 24}  # quadratic triangle / quadratic tetra


def write_vtk_snapshot(path, qmesh: QuadraticMesh, velocity=None, pressure=None,
                       title: str = "spectralstokes field") -> None:
    """Legacy-VTK ASCII unstructured grid with quadratic cells.

    Pressure lives on vertices; mid-edge values are averaged from the edge
    endpoints (exact for the linear pressure space) so viewers get full
    point data.
    """
    dim = qmesh.dim
    nodes = qmesh.nodes
    with open(Path(path), "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(nodes)} double\n")
        for x in nodes:
            row = list(x) + [0.0] * (3 - dim)
            fh.write(_fmt(*row) + "\n")
        conn = qmesh.vel_conn
        fh.write(f"CELLS {len(conn)} {len(conn) * (1 + conn.shape[1])}\n")
        for c in conn:
            fh.write(f"{conn.shape[1]} " + " ".join(str(v) for v in c) + "\n")
        fh.write(f"CELL_TYPES {len(conn)}\n")
        for _ in range(len(conn)):
            fh.write(f"{_VTK_CELL[dim]}\n")
        if velocity is None and pressure is None:
            return
        fh.write(f"POINT_DATA {len(nodes)}\n")
        if velocity is not None:
            velocity = np.asarray(velocity, dtype=float)
            fh.write("VECTORS velocity double\n")
            for v in velocity:
                row = list(v) + [0.0] * (3 - dim)
                fh.write(_fmt(*row) + "\n")
        if pressure is not None:
            pressure = np.asarray(pressure, dtype=float)
            full = np.empty(qmesh.n_velocity_nodes)
            full[: qmesh.n_vertices] = pressure
            mids = qmesh.edges
            full[qmesh.n_vertices :] = 0.5 * (pressure[mids[:, 0]] + pressure[mids[:, 1]])
            fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
            for p in full:
                fh.write(_fmt(p) + "\n")
