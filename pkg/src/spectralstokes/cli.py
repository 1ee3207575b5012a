"""Command-line interface.

Subcommands: ``solve`` runs a case config, ``compare`` tabulates two runs,
``oracle`` dumps analytic profiles, ``convergence`` drives parameter sweeps.
Report paths write a rendered PNG figure next to each CSV.
Exit codes: 0 success, 2 configuration error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .analytic import ChannelCase, PipeCase, channel_velocity, pipe_velocity
from .assembly import FluidProps
from .config import parse_config
from .errors import ConfigError, ConvergenceError, MeshError
from .figures import save_loglog, save_profiles, save_series
from .metrics import fit_loglog_slope
from .runner import compare_runs, read_flowrates, run_case

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONV = 3


def _cmd_solve(args) -> int:
    config = parse_config(args.config)
    if args.workers:
        config.workers = args.workers
    report = run_case(config)
    out = Path(report.output_dir)
    t, series = read_flowrates(out / "flowrates.csv")
    save_series(out / "flowrates.png", t, series, xlabel="t", ylabel="Q", title=config.name)
    report.manifest.append("flowrates.png")
    print(f"case {report.case}: {report.n_linear_solves} linear solves, "
          f"{report.total_iterations} GMRES iterations, converged={report.converged}")
    print(f"outputs in {out}")
    return EXIT_OK if report.converged else EXIT_NOCONV


def _cmd_compare(args) -> int:
    out_csv = Path(args.out) if args.out else Path(args.run_a) / "comparison.csv"
    rows = compare_runs(args.run_a, args.run_b, out_path=out_csv)
    ta, qa = read_flowrates(Path(args.run_a) / "flowrates.csv")
    tb, qb = read_flowrates(Path(args.run_b) / "flowrates.csv")
    series = {f"a:{k}": v for k, v in qa.items()}
    series.update({f"b:{k}": v for k, v in qb.items()})
    fig_path = out_csv.with_suffix(".png")
    save_series(fig_path, ta, series, xlabel="t", ylabel="Q", title="run comparison")
    for r in rows:
        print(f"{r['quantity']}: {r['value']:.6g}")
    print(f"wrote {out_csv} and {fig_path}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.case not in ("channel", "pipe"):
        raise ConfigError(f"oracle case must be channel or pipe, got '{args.case}'")
    n = args.points
    if n < 2:
        raise ConfigError("need at least 2 profile points")
    fluid = FluidProps(1.0, 1.0)
    w = args.womersley
    prefix = Path(args.out) if args.out else Path(f"oracle_{args.case}_W{w:g}")
    if args.case == "channel":
        case = ChannelCase(1.0, 1.0, 1.0, fluid)
        coord = np.linspace(-1.0, 1.0, n)
        omega = case.omega_for(w) if w > 0 else 0.0
        prof = channel_velocity(case, coord, omega)
        label = "y/H"
    else:
        case = PipeCase(1.0, 1.0, 1.0, fluid)
        coord = np.linspace(0.0, 1.0, n)
        omega = case.omega_for(w) if w > 0 else 0.0
        prof = pipe_velocity(case, coord, omega)
        label = "r/R"

    csv_path = prefix.with_suffix(".csv")
    with open(csv_path, "w") as fh:
        fh.write(f"{label.split('/')[0]},re_u,im_u,u_t0,u_T4,u_T2\n")
        for c, u in zip(coord, prof):
            fh.write(
                f"{c:.17g},{u.real:.17g},{u.imag:.17g},"
                f"{u.real:.17g},{(-u.imag):.17g},{(-u.real):.17g}\n"
            )
    profiles = {
        "t=0": prof.real,
        "t=T/4": -prof.imag,
        "t=T/2": -prof.real,
    }
    fig_path = prefix.with_suffix(".png")
    save_profiles(fig_path, coord, profiles, xlabel=label, ylabel="u",
                  title=f"{args.case} W={w:g}")
    print(f"wrote {csv_path} and {fig_path}")
    return EXIT_OK


_SWEEP_KEYS = {
    "h": "meshes",
    "W": "womersley",
    "epsL": "eps_l",
    "Nm": "nm",
    "dt": "steps_per_cycle",
}


def _sweep_configs(config, sweep: str):
    """Yield (x_value, modified config) pairs for a sweep parameter."""
    key = _SWEEP_KEYS[sweep]
    if key not in config.sweep:
        raise ConfigError(f"config [sweep] section is missing '{key}' for --sweep {sweep}")
    values = config.sweep[key]
    base_out = Path(config.output_dir)
    for i, raw in enumerate(values):
        sub = copy.deepcopy(config)
        sub.sweep = {}
        sub.output_dir = base_out / f"sweep_{sweep}_{i}"
        if sweep == "h":
            sub.mesh_path = Path(config.mesh_path).parent / raw
            yield None, sub  # x filled from the run report's h_max
        elif sweep == "W":
            if sub.oracle is None:
                raise ConfigError("a W sweep needs an [oracle] section to map W to omega")
            w = float(raw)
            nu = sub.fluid.kinematic_viscosity
            omega = w * nu / sub.oracle.size**2
            sub.period = 2.0 * np.pi / omega
            yield w, sub
        elif sweep == "epsL":
            sub.linear.tolerance = float(raw)
            yield float(raw), sub
        elif sweep == "Nm":
            sub.n_modes = int(raw)
            sub.adaptive_tol = None
            yield int(raw), sub
        else:  # dt
            sub.steps_per_cycle = int(raw)
            sub.solver = "mss"
            yield sub.period / int(raw), sub


def _cmd_convergence(args) -> int:
    config = parse_config(args.config)
    if config.oracle is None:
        raise ConfigError("convergence sweeps need an [oracle] section for the error metric")
    if not config.snapshot_times:
        config.snapshot_times = [0.5]
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    xs, es, rows = [], [], []
    ok = True
    for x, sub in _sweep_configs(config, args.sweep):
        report = run_case(sub)
        ok = ok and report.converged
        mpath = Path(report.output_dir) / "metrics.csv"
        if not mpath.exists():
            raise ConfigError("sweep run emitted no metrics.csv (oracle missing?)")
        with open(mpath) as fh:
            last = [line for line in fh if line.strip()][-1].split(",")
        e = float(last[-1])
        x_val = report.h_max if args.sweep == "h" else x
        xs.append(float(x_val))
        es.append(e)
        rows.append(f"{last[0]},{last[1]},{last[2]},{last[3]},{last[4]},{last[5].strip()}")
        print(f"{args.sweep} = {x_val:.6g}: e = {e:.6g}")

    csv_path = out / f"sweep_{args.sweep}.csv"
    with open(csv_path, "w") as fh:
        fh.write("case,W,h,eps_L,Nm,e\n")
        for r in rows:
            fh.write(r + "\n")
    slope = None
    if len(xs) >= 2 and min(xs) > 0 and min(es) > 0:
        slope = fit_loglog_slope(xs, es)
        print(f"fitted log-log slope: {slope:.4f}")
    fig_path = out / f"sweep_{args.sweep}.png"
    save_loglog(fig_path, xs, {"e": es}, xlabel=args.sweep, ylabel="e",
                title=f"{config.name} {args.sweep} sweep",
                guide_slopes=[round(slope, 1)] if slope is not None else ())
    with open(out / f"sweep_{args.sweep}_summary.json", "w") as fh:
        json.dump({"x": xs, "e": es, "slope": slope}, fh, indent=1)
    print(f"wrote {csv_path} and {fig_path}")
    return EXIT_OK if ok else EXIT_NOCONV


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectralstokes",
        description="Frequency-domain mixed finite element solver for time-periodic creeping flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a case configuration")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=0, help="override worker count")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("compare", help="compare two completed runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", default=None, help="comparison CSV path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("oracle", help="dump an analytic profile")
    p.add_argument("case", help="channel or pipe")
    p.add_argument("womersley", type=float)
    p.add_argument("points", type=int)
    p.add_argument("--out", default=None, help="output prefix")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("convergence", help="drive a parameter sweep")
    p.add_argument("config")
    p.add_argument("--sweep", required=True, choices=sorted(_SWEEP_KEYS))
    p.set_defaults(func=_cmd_convergence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
