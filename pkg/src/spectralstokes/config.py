"""Case configuration: flat key-value text with section headers (INI)."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import FluidProps
from .errors import ConfigError
from .krylov import SolverSettings
from .mesh import BoundaryGeometry, CircleBoundary, CylinderBoundary

WORKERS_ENV = "SPECTRALSTOKES_WORKERS"


@dataclass
class BcSpec:
    patch: str
    waveform_path: Path
    direction: np.ndarray


@dataclass
class OracleSpec:
    kind: str              # channel | pipe
    size: float            # half-height or radius
    length: float
    traction: float = 1.0


@dataclass
class CaseConfig:
    """Everything a run needs: mesh, fluid, period, BCs, solver knobs, output."""

    name: str
    solver: str
    mesh_path: Path
    output_dir: Path
    fluid: FluidProps
    period: float
    bcs: list = field(default_factory=list)
    geometry: BoundaryGeometry = field(default_factory=BoundaryGeometry)
    n_modes: int | None = None
    adaptive_tol: float | None = None
    max_modes: int = 32
    linear: SolverSettings = field(default_factory=SolverSettings)
    workers: int = 1
    steps_per_cycle: int = 2000
    cycles: int = 5
    rho_inf: float = 0.2
    steady_tol: float | None = None
    snapshot_times: list = field(default_factory=list)
    snapshot_format: str = "native"
    oracle: OracleSpec | None = None
    sweep: dict = field(default_factory=dict)
    viscous_form: str = "full"

    def __post_init__(self):
        if self.solver not in ("scvs", "mss"):
            raise ConfigError(f"solver must be scvs or mss, got '{self.solver}'")
        if self.solver == "scvs" and (self.n_modes is None) == (self.adaptive_tol is None):
            raise ConfigError("set exactly one of modes.count and modes.adaptive_tol for scvs")
        if not Path(self.mesh_path).exists():
            raise ConfigError(f"mesh file not found: {self.mesh_path}")
        for bc in self.bcs:
            if not Path(bc.waveform_path).exists():
                raise ConfigError(f"waveform file not found: {bc.waveform_path}")


def _floats(text: str):
    return [float(v) for v in text.split()]


def parse_config(path) -> CaseConfig:
    """Parse an INI case file into a validated :class:`CaseConfig`."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # patch names in [geometry] are case-sensitive
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent

    try:
        case = cp["case"]
        name = case.get("name", path.stem)
        solver = case.get("solver", "scvs").strip().lower()
        mesh_path = base / case["mesh"]
        output_dir = base / case.get("output", f"out-{name}")
        workers = case.getint("workers", 1)

        fluid = FluidProps(
            density=cp.getfloat("fluid", "density"),
            viscosity=cp.getfloat("fluid", "viscosity"),
        )
        period = cp.getfloat("time", "period")

        n_modes = adaptive_tol = None
        max_modes = 32
        if cp.has_section("modes"):
            if cp.has_option("modes", "count"):
                n_modes = cp.getint("modes", "count")
            if cp.has_option("modes", "adaptive_tol"):
                adaptive_tol = cp.getfloat("modes", "adaptive_tol")
            max_modes = cp.getint("modes", "max_modes", fallback=32)

        linear = SolverSettings()
        if cp.has_section("linear_solver"):
            ls = cp["linear_solver"]
            linear = SolverSettings(
                tolerance=ls.getfloat("tolerance", 1e-6),
                restart=ls.getint("restart", 200),
                max_iterations=ls.getint("max_iterations", 200_000),
                preconditioner=ls.get("preconditioner", "jacobi").strip().lower(),
            )

        steps_per_cycle, cycles, rho_inf, steady_tol = 2000, 5, 0.2, None
        if cp.has_section("mss"):
            ms = cp["mss"]
            if ms.get("dt", None):
                steps_per_cycle = int(round(period / ms.getfloat("dt")))
            else:
                steps_per_cycle = ms.getint("steps_per_cycle", 2000)
            cycles = ms.getint("cycles", 5)
            rho_inf = ms.getfloat("rho_inf", 0.2)
            if ms.get("steady_tol", None):
                steady_tol = ms.getfloat("steady_tol")

        bcs = []
        for section in cp.sections():
            if not section.startswith("bc."):
                continue
            patch = section[3:]
            sec = cp[section]
            direction = np.asarray(_floats(sec["direction"]))
            bcs.append(BcSpec(patch=patch, waveform_path=base / sec["waveform"], direction=direction))

        surfaces = {}
        if cp.has_section("geometry"):
            for patch, desc in cp["geometry"].items():
                words = desc.split()
                kind = words[0].lower()
                vals = [float(v) for v in words[1:]]
                if kind == "circle" and len(vals) == 3:
                    surfaces[patch] = CircleBoundary(center=vals[:2], radius=vals[2])
                elif kind == "cylinder" and len(vals) == 7:
                    surfaces[patch] = CylinderBoundary(point=vals[:3], axis=vals[3:6], radius=vals[6])
                else:
                    raise ConfigError(f"bad geometry descriptor for patch '{patch}': {desc}")

        snapshot_times = []
        snapshot_format = "native"
        if cp.has_section("output"):
            out = cp["output"]
            if out.get("snapshot_times", None):
                snapshot_times = _floats(out["snapshot_times"])
            snapshot_format = out.get("format", "native").strip().lower()

        oracle = None
        if cp.has_section("oracle"):
            osec = cp["oracle"]
            oracle = OracleSpec(
                kind=osec["kind"].strip().lower(),
                size=osec.getfloat("size"),
                length=osec.getfloat("length"),
                traction=osec.getfloat("traction", 1.0),
            )
            if oracle.kind not in ("channel", "pipe"):
                raise ConfigError(f"oracle kind must be channel or pipe, got '{oracle.kind}'")

        sweep = {}
        if cp.has_section("sweep"):
            for key, val in cp["sweep"].items():
                sweep[key] = val.split()

        config = CaseConfig(
            name=name,
            solver=solver,
            mesh_path=mesh_path,
            output_dir=output_dir,
            fluid=fluid,
            period=period,
            bcs=bcs,
            geometry=BoundaryGeometry(surfaces=surfaces),
            n_modes=n_modes,
            adaptive_tol=adaptive_tol,
            max_modes=max_modes,
            linear=linear,
            workers=workers,
            steps_per_cycle=steps_per_cycle,
            cycles=cycles,
            rho_inf=rho_inf,
            steady_tol=steady_tol,
            snapshot_times=snapshot_times,
            snapshot_format=snapshot_format,
            oracle=oracle,
            sweep=sweep,
            viscous_form=case.get("viscous_form", "full").strip().lower(),
        )
    except ConfigError:
        raise
    except (KeyError, configparser.Error, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        try:
            config.workers = int(env_workers)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{env_workers}'") from exc
    return config
