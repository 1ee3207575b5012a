"""Case orchestration: run SCVS or MSS from a config, persist results, compare runs.

Output directory layout (all files listed in the report manifest):
  report.json     deterministic run summary (modes/steps, residuals, manifest)
  timing.json     CPU/wall times (the one file exempt from bit-determinism)
  flowrates.csv   time series of boundary fluxes per patch
  metrics.csv     `case, W, h, eps_L, Nm, e` rows when an oracle is configured
  steps.csv       MSS per-step log (step, t, residual, gmres_iters)
  snapshot_*.txt  field snapshots at requested times (or .vtk)
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import ChannelCase, PipeCase, channel_velocity, pipe_velocity
from .config import CaseConfig, OracleSpec
from .errors import ConfigError
from .io import read_field_snapshot, read_waveform, write_field_snapshot
from .mesh import load_mesh, promote_to_quadratic, element_size
from .metrics import field_error, flow_rate, patch_area
from .spectral import (
    adaptive_mode_refinement,
    fourier_transform_bcs,
    reconstruct,
    solve_modes,
    truncation_error,
)
from .timedomain import TimeIntegrator, mss_run

N_FLOWRATE_SAMPLES = 256


@dataclass
class RunReport:
    """Summary of one case run plus the emitted-file manifest."""

    case: str
    solver: str
    mesh_path: str
    h_max: float
    n_linear_solves: int
    total_iterations: int
    converged: bool
    final_nm: int | None
    truncation: float | None
    mode_log: list
    manifest: list = field(default_factory=list)
    cpu_total: float = 0.0
    wall_max_task: float = 0.0
    wall_total: float = 0.0
    oracle: dict | None = None
    output_dir: str = ""
    period: float = 0.0

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "solver": self.solver,
            "mesh": self.mesh_path,
            "h_max": self.h_max,
            "period": self.period,
            "n_linear_solves": self.n_linear_solves,
            "total_iterations": self.total_iterations,
            "converged": self.converged,
            "final_nm": self.final_nm,
            "truncation_error": self.truncation,
            "modes": self.mode_log,
            "manifest": sorted(self.manifest),
            "oracle": self.oracle,
        }


def build_case(config: CaseConfig):
    """Load and promote the mesh, then attach the configured waveforms."""
    mesh = load_mesh(config.mesh_path)
    qmesh = promote_to_quadratic(mesh, config.geometry)
    waveforms = []
    seen = set()
    for bc in config.bcs:
        if bc.patch not in qmesh.boundary_patches:
            raise ConfigError(f"bc section names unknown patch '{bc.patch}'")
        kind = qmesh.boundary_patches[bc.patch].kind
        if kind == "wall":
            raise ConfigError(f"patch '{bc.patch}' is a wall; it takes no waveform")
        wf = read_waveform(
            bc.waveform_path, bc.patch, kind, bc.direction,
            period=config.period, area=patch_area(qmesh, bc.patch),
        )
        if abs(wf.period - config.period) > 1e-9 * config.period:
            raise ConfigError(
                f"waveform for '{bc.patch}' implies period {wf.period:g}, case says {config.period:g}"
            )
        waveforms.append(wf)
        seen.add(bc.patch)
    for name, patch in qmesh.boundary_patches.items():
        if patch.kind == "dirichlet" and name not in seen:
            raise ConfigError(f"dirichlet patch '{name}' has no bc section")
    return qmesh, waveforms


def _oracle_case(spec: OracleSpec, config: CaseConfig):
    if spec.kind == "channel":
        return ChannelCase(spec.size, spec.length, spec.traction, config.fluid)
    return PipeCase(spec.size, spec.length, spec.traction, config.fluid)


def _oracle_field(spec, case, coeffs, frequencies, t, coords, dim):
    """Analytic reconstruction at time t for the configured traction spectrum."""
    out = np.zeros((coords.shape[0], dim))
    for c, omega in zip(coeffs, frequencies):
        if c == 0:
            continue
        if spec.kind == "channel":
            case_i = ChannelCase(case.half_height, case.length, c, case.fluid)
            prof = channel_velocity(case_i, coords[:, 1], omega)
            comp = 0
        else:
            case_i = PipeCase(case.radius, case.length, c, case.fluid)
            r = np.linalg.norm(coords[:, :2], axis=1)
            prof = pipe_velocity(case_i, np.minimum(r, case.radius), omega)
            comp = 2
        out[:, comp] += np.real(prof * np.exp(1j * omega * t))
    return out


def _metrics_rows(config, qmesh, h_max, coeffs, frequencies, times, fields, nm):
    """One `case, W, h, eps_L, Nm, e` row per evaluation time."""
    spec = config.oracle
    case = _oracle_case(spec, config)
    nu = config.fluid.kinematic_viscosity
    w1 = frequencies[1] * spec.size**2 / nu if len(frequencies) > 1 else 0.0
    rows = []
    for t, field_t in zip(times, fields):
        def oracle(coords, t=t):
            return _oracle_field(spec, case, coeffs, frequencies, t, coords, qmesh.dim)

        e = field_error(field_t, oracle, qmesh)
        rows.append(
            {
                "case": f"{config.name}@t/T={t / config.period:.6g}",
                "W": w1,
                "h": h_max,
                "eps_L": config.linear.tolerance,
                "Nm": nm,
                "e": e,
            }
        )
    return rows


def _write_metrics(path, rows):
    with open(path, "w") as fh:
        fh.write("case,W,h,eps_L,Nm,e\n")
        for r in rows:
            fh.write(
                f"{r['case']},{r['W']:.17g},{r['h']:.17g},{r['eps_L']:.17g},"
                f"{r['Nm']},{r['e']:.17g}\n"
            )


def _write_flowrates(path, times, series):
    names = sorted(series)
    with open(path, "w") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for i, t in enumerate(times):
            fh.write(f"{t:.17g}," + ",".join(f"{series[n][i]:.17g}" for n in names) + "\n")


def read_flowrates(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.asarray([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    return data[:, 0], {name: data[:, j + 1] for j, name in enumerate(header[1:])}


def run_case(config: CaseConfig) -> RunReport:
    """Execute the configured solver and write every artifact to the output dir."""
    wall0 = time.perf_counter()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    qmesh, waveforms = build_case(config)
    _, h_max = element_size(qmesh)

    if config.solver == "scvs":
        report = _run_scvs(config, qmesh, waveforms, h_max, out)
    else:
        report = _run_mss(config, qmesh, waveforms, h_max, out)

    report.wall_total = time.perf_counter() - wall0
    report.output_dir = str(out)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
    with open(out / "timing.json", "w") as fh:
        json.dump(
            {
                "cpu_total": report.cpu_total,
                "wall_max_task": report.wall_max_task,
                "wall_total": report.wall_total,
            },
            fh,
            indent=1,
        )
    report.manifest.extend(["report.json", "timing.json"])
    return report


def _run_scvs(config, qmesh, waveforms, h_max, out):
    if not waveforms:
        raise ConfigError("scvs needs at least one boundary waveform")
    if config.n_modes is not None:
        mode_set = fourier_transform_bcs(waveforms, config.n_modes)
        solutions = solve_modes(
            qmesh, config.fluid, mode_set, config.linear,
            workers=config.workers, viscous_form=config.viscous_form,
        )
        final_nm = config.n_modes
    else:
        solutions, final_nm, ok = adaptive_mode_refinement(
            qmesh, config.fluid, waveforms, config.adaptive_tol,
            config.linear, max_modes=config.max_modes, viscous_form=config.viscous_form,
        )
        mode_set = fourier_transform_bcs(waveforms, solutions[-1].index)
    e_m = truncation_error(waveforms, mode_set)

    manifest = []
    period = config.period
    # Flow rates: complex per-mode flux reconstructed over one period.
    patches = [n for n, p in qmesh.boundary_patches.items() if p.kind != "wall"]
    times = np.arange(N_FLOWRATE_SAMPLES) * period / N_FLOWRATE_SAMPLES
    series = {}
    for name in patches:
        q_modes = [flow_rate(s.velocity, qmesh, name) for s in solutions]
        vals = np.zeros(times.size)
        for q, s in zip(q_modes, solutions):
            vals += np.real(q * np.exp(1j * s.omega * times))
        series[name] = vals
    _write_flowrates(out / "flowrates.csv", times, series)
    manifest.append("flowrates.csv")

    snap_times = [f * period for f in config.snapshot_times]
    fields = []
    for t in snap_times:
        u, p = reconstruct(solutions, t)
        ext = "vtk" if config.snapshot_format == "vtk" else "txt"
        fname = f"snapshot_t{t / period:.4f}.{ext}"
        write_field_snapshot(out / fname, qmesh, u, p, fmt=config.snapshot_format, time=t)
        manifest.append(fname)
        fields.append(u)

    if config.oracle is not None and snap_times:
        inlet_wf = next((w for w in waveforms if w.kind == "neumann"), waveforms[0])
        coeffs = mode_set.coefficients[inlet_wf.patch]
        rows = _metrics_rows(
            config, qmesh, h_max, coeffs, mode_set.frequencies, snap_times, fields, final_nm
        )
        _write_metrics(out / "metrics.csv", rows)
        manifest.append("metrics.csv")

    mode_log = [
        {
            "mode": s.index,
            "omega": s.omega,
            "iterations": s.report.iterations,
            "residual": s.report.residual,
            "converged": s.report.converged,
            "skipped": s.report.iterations == 0 and s.report.residual == 0.0,
        }
        for s in solutions
    ]
    solved = [s for s in solutions if s.report.iterations > 0]
    return RunReport(
        case=config.name,
        solver="scvs",
        mesh_path=str(config.mesh_path),
        h_max=h_max,
        n_linear_solves=len(solved),
        total_iterations=sum(s.report.iterations for s in solutions),
        converged=all(s.report.converged for s in solutions),
        final_nm=final_nm,
        truncation=e_m,
        mode_log=mode_log,
        manifest=manifest,
        cpu_total=sum(s.report.cpu_time for s in solutions),
        wall_max_task=max((s.report.wall_time for s in solutions), default=0.0),
        oracle=None if config.oracle is None else vars(config.oracle),
        period=config.period,
    )


def _run_mss(config, qmesh, waveforms, h_max, out):
    if not waveforms:
        raise ConfigError("mss needs at least one boundary waveform")
    period = config.period
    dt = period / config.steps_per_cycle
    integ = TimeIntegrator(rho_inf=config.rho_inf, dt=dt)
    patches = [n for n, p in qmesh.boundary_patches.items() if p.kind != "wall"]

    cpu0 = time.process_time()
    result = mss_run(
        qmesh, config.fluid, waveforms, integ, config.linear,
        cycles=config.cycles, steady_tol=config.steady_tol, flux_patches=patches,
    )
    cpu = time.process_time() - cpu0

    manifest = []
    _write_flowrates(out / "flowrates.csv", result.times, result.flow_rates)
    manifest.append("flowrates.csv")
    with open(out / "steps.csv", "w") as fh:
        fh.write("step,t,residual,gmres_iters\n")
        for step, t, res, iters in result.step_log:
            fh.write(f"{step},{t:.17g},{res:.17g},{iters}\n")
    manifest.append("steps.csv")

    # Snapshots: nearest last-cycle step to each requested fraction of T.
    snap_times = []
    fields = []
    state_times = np.asarray([s.time for s in result.states])
    for f in config.snapshot_times:
        target = (config.cycles - 1 + f) * period
        if not len(state_times):
            break
        k = int(np.argmin(np.abs(state_times - target)))
        st = result.states[k]
        ext = "vtk" if config.snapshot_format == "vtk" else "txt"
        fname = f"snapshot_t{f:.4f}.{ext}"
        write_field_snapshot(
            out / fname, qmesh, st.velocity, st.pressure,
            fmt=config.snapshot_format, time=st.time,
        )
        manifest.append(fname)
        snap_times.append(st.time % period)
        fields.append(st.velocity)

    if config.oracle is not None and snap_times:
        n_res = min(10, min(w.max_modes() for w in waveforms))
        mode_set = fourier_transform_bcs(waveforms, max(n_res, 0))
        inlet_wf = next((w for w in waveforms if w.kind == "neumann"), waveforms[0])
        coeffs = mode_set.coefficients[inlet_wf.patch]
        rows = _metrics_rows(
            config, qmesh, h_max, coeffs, mode_set.frequencies, snap_times, fields, n_res
        )
        _write_metrics(out / "metrics.csv", rows)
        manifest.append("metrics.csv")

    iters = [entry[3] for entry in result.step_log]
    return RunReport(
        case=config.name,
        solver="mss",
        mesh_path=str(config.mesh_path),
        h_max=h_max,
        n_linear_solves=result.n_solves,
        total_iterations=int(sum(iters)),
        converged=True,
        final_nm=None,
        truncation=None,
        mode_log=[
            {"step": s, "t": t, "residual": r, "iterations": it}
            for s, t, r, it in result.step_log[:: max(1, len(result.step_log) // 200)]
        ],
        manifest=manifest,
        cpu_total=cpu,
        wall_max_task=0.0,
        oracle=None if config.oracle is None else vars(config.oracle),
        period=config.period,
    )


def compare_runs(dir_a, dir_b, out_path=None):
    """Tabulate flow-rate differences, oracle errors, and cost ratios of two runs."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    rows = []
    rep = {}
    for tag, d in (("a", dir_a), ("b", dir_b)):
        path = d / "report.json"
        if not path.exists():
            raise ConfigError(f"no report.json in {d}")
        with open(path) as fh:
            rep[tag] = json.load(fh)
        with open(d / "timing.json") as fh:
            rep[tag]["timing"] = json.load(fh)

    ta, qa = read_flowrates(dir_a / "flowrates.csv")
    tb, qb = read_flowrates(dir_b / "flowrates.csv")
    common = sorted(set(qa) & set(qb))
    if ta.shape == tb.shape and np.allclose(ta, tb, rtol=0, atol=1e-12 * (ta.max() + 1e-300)):
        for name in common:
            denom = np.linalg.norm(qb[name])
            diff = np.linalg.norm(qa[name] - qb[name]) / denom if denom > 0 else 0.0
            rows.append({"quantity": f"flowrate_rel_diff[{name}]", "value": diff})
    else:
        # Different time grids (e.g. spectral samples vs time steps): both are
        # periodic, so fold onto one period and interpolate b onto a's grid.
        period = rep["a"].get("period") or rep["b"].get("period")
        if not period:
            raise ConfigError("incompatible runs: time grids differ and no period recorded")
        fa = np.mod(ta, period)
        order_a = np.argsort(fa)
        last_b = tb > tb.max() - period + 1e-12 * period
        fb = np.mod(tb[last_b], period)
        order_b = np.argsort(fb)
        for name in common:
            ya = qa[name][order_a]
            xb = fb[order_b]
            yb = qb[name][last_b][order_b]
            # periodic linear interpolation of b at a's sample times
            xb_ext = np.concatenate([xb, [xb[0] + period]])
            yb_ext = np.concatenate([yb, [yb[0]]])
            yb_on_a = np.interp(fa[order_a], xb_ext, yb_ext)
            denom = np.linalg.norm(yb_on_a)
            diff = np.linalg.norm(ya - yb_on_a) / denom if denom > 0 else 0.0
            rows.append({"quantity": f"flowrate_rel_diff[{name}]", "value": diff})

    for def_a in rep["a"].get("manifest", []):
        if not def_a.startswith("snapshot_") or not def_a.endswith(".txt"):
            continue
        if def_a not in rep["b"].get("manifest", []):
            continue
        ca, va, pa, _ = read_field_snapshot(dir_a / def_a)
        cb, vb, pb, _ = read_field_snapshot(dir_b / def_a)
        if va.shape != vb.shape:
            continue
        denom = np.linalg.norm(vb)
        rel = np.linalg.norm(va - vb) / denom if denom > 0 else 0.0
        rows.append({"quantity": f"field_rel_diff[{def_a}]", "value": rel})

    for d, tag in ((dir_a, "a"), (dir_b, "b")):
        mpath = d / "metrics.csv"
        if mpath.exists():
            with open(mpath) as fh:
                next(fh)
                for line in fh:
                    parts = line.strip().split(",")
                    rows.append({"quantity": f"e[{tag}:{parts[0]}]", "value": float(parts[-1])})

    cost_a = rep["a"]["timing"]["cpu_total"]
    cost_b = rep["b"]["timing"]["cpu_total"]
    if cost_b > 0:
        rows.append({"quantity": "relative_cost_percent", "value": 100.0 * cost_a / cost_b})

    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write("quantity,value\n")
            for r in rows:
                fh.write(f"{r['quantity']},{r['value']:.17g}\n")
    return rows
