"""Frequency-domain mixed finite element solver for time-periodic creeping flow.

Workflow: Fourier-transform the periodic boundary data, solve one complex
saddle-point system per retained frequency (independently, hence in
parallel), and reconstruct the time-domain solution as the real part of the
mode sum.  A generalized-alpha time-domain solver over the same mixed
elements provides an independent cross-check.
"""

from .analytic import ChannelCase, PipeCase, channel_velocity, pipe_velocity, womersley_norms
from .assembly import (
    ComplexSaddleSystem,
    FluidProps,
    ShapeSet,
    assemble_mode_system,
    boundary_traction_load,
    reference_shapes,
)
from .bessel import bessel_j
from .config import CaseConfig, parse_config
from .errors import ConfigError, ConvergenceError, MeshError
from .krylov import SolveReport, SolverSettings, gmres_solve, jacobi_precondition
from .mesh import (
    BoundaryGeometry,
    CircleBoundary,
    CylinderBoundary,
    Mesh,
    QuadraticMesh,
    element_size,
    load_mesh,
    promote_to_quadratic,
    write_mesh,
)
from .metrics import field_error, fit_loglog_slope, flow_rate, l2_norm, patch_area
from .runner import RunReport, compare_runs, run_case
from .spectral import (
    BoundaryWaveform,
    ModeSet,
    ModeSolution,
    adaptive_mode_refinement,
    fourier_transform_bcs,
    reconstruct,
    solve_modes,
    truncation_error,
)
from .timedomain import MssOperator, TimeIntegrator, TimeState, mss_run, mss_step

__version__ = "0.1.0"
