"""Frequency-domain driver: transform boundary data, solve modes, reconstruct.

Spectrum convention: one-sided modes i = 0..N_m with real-part reconstruction
``u(t) = Re(sum_i u_i exp(1j*omega_i*t))``.  Coefficients for i >= 1 carry a
factor 2 relative to the plain ``(1/T) integral`` so that reconstruction of a
real input reproduces it exactly (the conjugate negative-frequency half is
absorbed).  Modes are independent boundary value problems and are scheduled
onto a thread pool; results do not depend on scheduling order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_mode_system
from .krylov import SolveReport, SolverSettings, gmres_solve
from .mesh import QuadraticMesh
from .metrics import l2_norm

#: Factor applied to coefficients of modes i >= 1 (one-sided real-part convention).
ONE_SIDED_FACTOR = 2.0


@dataclass
class BoundaryWaveform:
    """Time-periodic scalar signal on one boundary patch, times a fixed direction.

    Exactly one of ``samples`` (uniform over one period, endpoint excluded) or
    ``coefficients`` (one-sided, already carrying the factor-2 convention)
    must be given.  ``area`` weights multi-patch truncation-error norms and is
    filled in by the case runner.
    """

    patch: str
    kind: str
    direction: np.ndarray
    period: float
    samples: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    area: float = 1.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"waveform kind must be dirichlet or neumann, got '{self.kind}'")
        if self.period <= 0:
            raise ValueError("period must be positive")
        self.direction = np.asarray(self.direction, dtype=float)
        if (self.samples is None) == (self.coefficients is None):
            raise ValueError("provide exactly one of samples or coefficients")
        if self.samples is not None:
            self.samples = np.asarray(self.samples, dtype=float)
            if self.samples.size < 2:
                raise ValueError("sampled waveform needs at least 2 samples")
        else:
            self.coefficients = np.asarray(self.coefficients, dtype=complex)

    @classmethod
    def from_samples(cls, patch, kind, direction, times, values, area=1.0):
        """Build from (t, value) samples; tolerates an explicit repeated endpoint."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ValueError("need matching 1D time and value arrays")
        dt = np.diff(times)
        if np.any(np.abs(dt - dt[0]) > 1e-9 * abs(dt[0])):
            raise ValueError("waveform samples must be uniformly spaced")
        if values[-1] == values[0]:
            # Closed sampling t in [0, T]: drop the duplicate endpoint.
            period = times[-1] - times[0]
            values = values[:-1]
        else:
            period = times[-1] + dt[0] - times[0]
        return cls(patch=patch, kind=kind, direction=direction, period=period, samples=values, area=area)

    def max_modes(self) -> int:
        """Largest resolvable mode index (aliasing guard for sampled input)."""
        if self.samples is not None:
            return self.samples.size // 2 - 1
        return self.coefficients.size - 1

    def mode_coefficients(self, n_modes: int) -> np.ndarray:
        """One-sided coefficients 0..n_modes under the factor-2 convention."""
        if self.coefficients is not None:
            out = np.zeros(n_modes + 1, dtype=complex)
            take = min(n_modes + 1, self.coefficients.size)
            out[:take] = self.coefficients[:take]
            return out
        n = self.samples.size
        if n < 2 * (n_modes + 1):
            raise ValueError(
                f"waveform '{self.patch}' has {n} samples; at least {2 * (n_modes + 1)} "
                f"are needed to resolve {n_modes} modes"
            )
        spec = np.fft.rfft(self.samples) / n
        out = spec[: n_modes + 1].astype(complex)
        out[1:] *= ONE_SIDED_FACTOR
        return out

    def evaluate(self, t):
        """Time-domain value of the scalar signal at (scalar or array) ``t``."""
        t = np.asarray(t, dtype=float)
        if self.coefficients is not None:
            i = np.arange(self.coefficients.size)
            phases = np.exp(1j * 2.0 * np.pi * np.outer(t, i) / self.period)
            return np.real(phases @ self.coefficients).reshape(t.shape)
        n = self.samples.size
        grid = np.linspace(0.0, self.period, n + 1)
        vals = np.append(self.samples, self.samples[0])
        return np.interp(np.mod(t, self.period), grid, vals)

    def signal_norm_sq(self, n_modes: int | None = None) -> float:
        """``integral(|signal - truncation|^2 dt)`` over one period; full norm if None."""
        if self.samples is not None:
            if n_modes is None:
                return float(np.mean(self.samples**2) * self.period)
            coeffs = self.mode_coefficients(n_modes)
            t = np.arange(self.samples.size) * self.period / self.samples.size
            trunc = reconstruct_signal(coeffs, self.period, t)
            return float(np.mean((self.samples - trunc) ** 2) * self.period)
        c = self.coefficients
        if n_modes is None:
            tail = np.abs(c) ** 2
            tail[1:] *= 0.5
            return float(self.period * (tail[0] + tail[1:].sum()))
        tail = np.abs(c[n_modes + 1 :]) ** 2
        return float(0.5 * self.period * tail.sum())


def reconstruct_signal(coefficients, period, t):
    """Real-part reconstruction of a one-sided coefficient set at times ``t``."""
    t = np.asarray(t, dtype=float)
    i = np.arange(len(coefficients))
    phases = np.exp(1j * 2.0 * np.pi * np.outer(t, i) / period)
    return np.real(phases @ np.asarray(coefficients, dtype=complex)).reshape(t.shape)


@dataclass
class ModeSet:
    """Frequencies and per-patch complex coefficients for modes 0..N_m."""

    indices: np.ndarray
    frequencies: np.ndarray
    period: float
    coefficients: dict
    waveforms: list = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return int(self.indices.max())

    def patch_kind(self, patch: str) -> str:
        for wf in self.waveforms:
            if wf.patch == patch:
                return wf.kind
        raise KeyError(patch)

    def scaled(self, alpha: complex) -> "ModeSet":
        return ModeSet(
            indices=self.indices,
            frequencies=self.frequencies,
            period=self.period,
            coefficients={p: alpha * c for p, c in self.coefficients.items()},
            waveforms=self.waveforms,
        )

    def thresholded(self, relative_amplitude: float) -> "ModeSet":
        """Keep only modes whose amplitude reaches the per-patch threshold.

        A mode survives if on any patch its coefficient magnitude is at least
        ``relative_amplitude`` times that patch's largest magnitude; the rest
        are zeroed, so the solver short-circuits them.  This selects a
        possibly non-consecutive mode set purely by amplitude.
        """
        keep = np.zeros(self.indices.size, dtype=bool)
        for coeffs in self.coefficients.values():
            mags = np.abs(coeffs)
            top = mags.max()
            if top > 0:
                keep |= mags >= relative_amplitude * top
        pruned = {p: np.where(keep, c, 0.0) for p, c in self.coefficients.items()}
        return ModeSet(
            indices=self.indices,
            frequencies=self.frequencies,
            period=self.period,
            coefficients=pruned,
            waveforms=self.waveforms,
        )


def fourier_transform_bcs(waveforms, n_modes: int) -> ModeSet:
    """Trapezoidal Fourier transform of every boundary signal up to ``n_modes``."""
    waveforms = list(waveforms)
    if not waveforms:
        raise ValueError("no boundary waveforms given")
    period = waveforms[0].period
    for wf in waveforms:
        if abs(wf.period - period) > 1e-12 * period:
            raise ValueError("all waveforms must share one period")
    coeffs = {wf.patch: wf.mode_coefficients(n_modes) for wf in waveforms}
    indices = np.arange(n_modes + 1)
    return ModeSet(
        indices=indices,
        frequencies=2.0 * np.pi * indices / period,
        period=period,
        coefficients=coeffs,
        waveforms=waveforms,
    )


def truncation_error(waveforms, mode_set: ModeSet) -> float:
    """A-priori mode-truncation estimate from the boundary data alone.

    Per boundary kind, the time-L2 energy outside the kept modes is summed
    over patches (weighted by patch measure and direction magnitude) and
    normalized by the total signal energy; kinds with no data are skipped.
    An all-zero boundary set returns 0 with a warning.
    """
    n_modes = mode_set.n_modes
    total = 0.0
    any_data = False
    for kind in ("neumann", "dirichlet"):
        num = 0.0
        den = 0.0
        for wf in waveforms:
            if wf.kind != kind:
                continue
            weight = wf.area * float(np.dot(wf.direction, wf.direction))
            den += weight * wf.signal_norm_sq()
            num += weight * wf.signal_norm_sq(n_modes)
        if den > 0.0:
            any_data = True
            total += num / den
    if not any_data:
        warnings.warn("truncation_error: all boundary signals are zero; e_M defined as 0")
        return 0.0
    return float(np.sqrt(total))


@dataclass
class ModeSolution:
    """Complex nodal velocity/pressure for one frequency, with its solve report."""

    index: int
    omega: float
    velocity: np.ndarray
    pressure: np.ndarray
    report: SolveReport


def _solve_one_mode(qmesh, props, mode_set, settings, idx, viscous_form):
    omega = float(mode_set.frequencies[idx])
    g_mode = {}
    h_mode = {}
    for patch, coeffs in mode_set.coefficients.items():
        c = coeffs[idx]
        kind = mode_set.patch_kind(patch)
        wf = next(w for w in mode_set.waveforms if w.patch == patch)
        if kind == "dirichlet":
            g_mode[patch] = c * wf.direction.astype(complex)
        else:
            h_mode[patch] = c * wf.direction.astype(complex)

    if all(np.all(v == 0) for v in g_mode.values()) and all(
        np.all(v == 0) for v in h_mode.values()
    ):
        nv, dim = qmesh.n_velocity_nodes, qmesh.dim
        report = SolveReport(iterations=0, residual=0.0, converged=True, wall_time=0.0)
        return ModeSolution(
            index=idx,
            omega=omega,
            velocity=np.zeros((nv, dim), dtype=complex),
            pressure=np.zeros(qmesh.n_vertices, dtype=complex),
            report=report,
        )

    system = assemble_mode_system(qmesh, props, omega, g_mode=g_mode, h_mode=h_mode,
                                  viscous_form=viscous_form)
    x, report = gmres_solve(system, settings)
    u, p = system.expand(x)
    return ModeSolution(index=idx, omega=omega, velocity=u, pressure=p, report=report)


def solve_modes(qmesh, props, mode_set, settings=None, workers: int = 1,
                viscous_form: str = "full"):
    """One independent boundary value problem per mode; zero modes short-circuit.

    With ``workers > 1`` modes run on a thread pool; each task owns its system
    exclusively, so results are identical to the sequential order.
    """
    settings = settings or SolverSettings()
    indices = [int(i) for i in mode_set.indices]
    if workers <= 1:
        return [
            _solve_one_mode(qmesh, props, mode_set, settings, i, viscous_form) for i in indices
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_solve_one_mode, qmesh, props, mode_set, settings, i, viscous_form)
            for i in indices
        ]
        return [f.result() for f in futures]


def reconstruct(solutions, t: float):
    """Real nodal velocity and pressure at time ``t`` from the mode set."""
    first = solutions[0]
    u = np.zeros(first.velocity.shape, dtype=float)
    p = np.zeros(first.pressure.shape, dtype=float)
    for sol in solutions:
        phase = np.exp(1j * sol.omega * t)
        u += np.real(sol.velocity * phase)
        p += np.real(sol.pressure * phase)
    return u, p


def _mode_time_weight(index: int, period: float) -> float:
    # integral over one period of Re(c e^{j w t})^2 contributes T for the mean
    # mode and T/2 otherwise (cross terms vanish).
    return period if index == 0 else 0.5 * period


def mode_energies(solutions, qmesh: QuadraticMesh, period: float) -> np.ndarray:
    """Per-mode contribution to ||u||^2 over Omega x [0, T]."""
    return np.array(
        [_mode_time_weight(s.index, period) * l2_norm(s.velocity, qmesh) ** 2 for s in solutions]
    )


def adaptive_mode_refinement(qmesh, props, waveforms, tol: float, settings=None,
                             max_modes: int = 32, viscous_form: str = "full"):
    """Grow the mode set until successive reconstructions agree to ``tol``.

    The relative L2(Omega x [0,T]) difference between the N-mode and
    (N-1)-mode reconstructions is the energy fraction of mode N; previously
    computed modes are never re-solved.  Returns
    ``(solutions, final_n_m, converged)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    settings = settings or SolverSettings()
    # Coefficient-form signals are zero beyond their band limit, so only
    # sampled signals bound the reachable mode count (aliasing guard).
    cap = max_modes
    for wf in waveforms:
        if wf.samples is not None:
            cap = min(cap, wf.max_modes())
    mode_set = fourier_transform_bcs(waveforms, cap)

    solutions = []
    energies = []
    converged = False
    for n in range(cap + 1):
        sol = _solve_one_mode(qmesh, props, mode_set, settings, n, viscous_form)
        solutions.append(sol)
        energies.append(_mode_time_weight(n, mode_set.period) * l2_norm(sol.velocity, qmesh) ** 2)
        if n == 0:
            continue
        total = float(np.sum(energies))
        diff = 0.0 if total == 0.0 else float(np.sqrt(energies[-1] / total))
        if diff <= tol:
            converged = True
            break

    final_nm = solutions[-1].index
    while final_nm > 0 and not np.any(solutions[final_nm].velocity):
        final_nm -= 1
    return solutions, final_nm, converged
