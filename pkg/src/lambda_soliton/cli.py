"""Command-line surface: run simulations and studies, emit CSV/SVG.

Exit codes: 0 success, 1 usage error, 2 numerical failure (solver breakdown,
invalid experiment bracket, ...).  All outputs are written atomically and get
a JSON sidecar (<name>.meta) with the config digest and tool version; the
CSV/SVG bytes themselves are deterministic for identical flags.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .errors import (
    BracketInvalid,
    DivisionNearZero,
    EmptySeries,
    GridMismatch,
    SingularOrIllConditioned,
    TooFewRows,
    TooFewSamples,
)
from .experiments import (
    FORMATION_DT,
    FORMATION_STEPS,
    FORMATION_STRIDE,
    DEFAULT_N_POINTS,
    config_digest,
    height_vs_time,
    threshold_gradient,
    velocity_vs_lambda,
)
from .field import GridSpec, SimulationConfig, Uniform, UniformWithEdgeRamp
from .fractional import GLConfig, compare_lambda_gl
from .scheme import simulate
from .svgplot import EventMarker, Series, render_svg_lineplot
from .tableio import write_csv, write_sidecar_meta

_NUMERICAL_ERRORS = (
    SingularOrIllConditioned,
    BracketInvalid,
    DivisionNearZero,
    GridMismatch,
    TooFewRows,
    TooFewSamples,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}: {exc}")


def _meta(command: str, params: dict) -> dict:
    payload = command + "|" + "|".join(f"{k}={params[k]}" for k in sorted(params))
    return {
        "tool": f"lambda-soliton {__version__}",
        "command": command,
        "parameters": {k: str(v) for k, v in params.items()},
        "config_digest": config_digest(payload),
        "timestamp": time.time(),
    }


def build_parser() -> _Parser:
    p = _Parser(prog="lambda-soliton", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="one run, trajectory.csv output")
    sim.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sim.add_argument("--c-real", type=float, default=0.0)
    sim.add_argument("--c-imag", type=float, default=1.0)
    sim.add_argument("--n", type=int, default=DEFAULT_N_POINTS)
    sim.add_argument("--dt", type=float, default=FORMATION_DT)
    sim.add_argument("--steps", type=int, default=FORMATION_STEPS)
    sim.add_argument("--stride", type=int, default=FORMATION_STRIDE)
    sim.add_argument("--ic", choices=["uniform", "ramp"], default="uniform")
    sim.add_argument("--level", type=float, default=1.0)
    sim.add_argument("--gradient", type=float, default=0.001)
    sim.add_argument("--ramp-width", type=float, default=0.1)
    sim.add_argument("--out", type=Path, default=Path("."))

    sweep = sub.add_parser("sweep-velocity", help="velocity vs lambda per C")
    sweep.add_argument("--c-real", type=float, default=0.0)
    sweep.add_argument("--c-imag-list", type=str, default="0.5,1.0,1.5")
    sweep.add_argument("--lambda-min", type=float, default=0.1)
    sweep.add_argument("--lambda-max", type=float, default=1.9)
    sweep.add_argument("--lambda-step", type=float, default=0.1)
    sweep.add_argument("--ic-mode", choices=["probe", "uniform"], default="probe")
    sweep.add_argument("--out", type=Path, default=Path("."))

    thr = sub.add_parser("threshold", help="bisect the formation threshold")
    thr.add_argument("--lambda", dest="lam", type=float, default=1.0)
    thr.add_argument("--c-real", type=float, default=0.0)
    thr.add_argument("--c-imag", type=float, default=1.0)
    thr.add_argument("--bracket-lo", type=float, default=1e-5)
    thr.add_argument("--bracket-hi", type=float, default=1e-1)
    thr.add_argument("--tol", type=float, default=1e-4)
    thr.add_argument("--mode", choices=["jump", "ramp"], default="jump")
    thr.add_argument("--out", type=Path, default=Path("."))

    hts = sub.add_parser("height-trace", help="height vs time per C with events")
    hts.add_argument("--lambda", dest="lam", type=float, default=1.0)
    hts.add_argument("--c-real", type=float, default=0.0)
    hts.add_argument("--c-imag-list", type=str, default="2.8,1.5,0.5")
    hts.add_argument("--out", type=Path, default=Path("."))

    glc = sub.add_parser("gl-compare", help="lambda scheme vs fractional stepper")
    glc.add_argument("--lambda", dest="lam", type=float, default=1.0)
    glc.add_argument("--c-real", type=float, default=0.0)
    glc.add_argument("--c-imag", type=float, default=1.0)
    glc.add_argument("--gamma", type=float, default=1.0)
    glc.add_argument("--k-real", type=float, default=None)
    glc.add_argument("--k-imag", type=float, default=None)
    glc.add_argument("--n", type=int, default=101)
    glc.add_argument("--dt", type=float, default=FORMATION_DT)
    glc.add_argument("--steps", type=int, default=200)
    glc.add_argument("--stride", type=int, default=2)
    glc.add_argument("--memory", type=int, default=0, help="history cap, 0 = unbounded")
    glc.add_argument("--out", type=Path, default=Path("."))

    return p


def _cmd_simulate(args) -> int:
    if args.ic == "uniform":
        ic = Uniform(args.level)
    else:
        ic = UniformWithEdgeRamp(args.level, args.gradient, args.ramp_width)
    cfg = SimulationConfig(
        grid=GridSpec(args.n), lam=args.lam, c_coef=complex(args.c_real, args.c_imag),
        dt=args.dt, n_steps=args.steps, snapshot_stride=args.stride, ic=ic,
    )
    traj = simulate(cfg)
    x = cfg.grid.node_positions()
    rows = []
    for snap in traj.snapshots:
        for j in range(cfg.grid.n_points):
            v = snap.values[j]
            rows.append((snap.time_index, float(x[j]), v.real, v.imag, abs(v)))
    out = args.out / "trajectory.csv"
    write_csv(out, ["step", "x", "u_re", "u_im", "abs_u"], rows)
    write_sidecar_meta(out, _meta("simulate", vars(args) | {"out": str(args.out)}))
    return 0


def _cmd_sweep_velocity(args) -> int:
    c_list = [complex(args.c_real, im) for im in _float_list(args.c_imag_list)]
    if not c_list:
        raise UsageError("empty C list")
    grid = []
    lam = args.lambda_min
    while lam <= args.lambda_max + 1e-12:
        grid.append(round(lam, 12))
        lam += args.lambda_step
    sweep = velocity_vs_lambda(c_list, grid, ic_mode=args.ic_mode)

    rows = [
        (r.c_coef.real, r.c_coef.imag, r.lam, r.velocity_abs, r.velocity_rel,
         r.n_tracks, r.formation_step)
        for r in sweep.rows
    ]
    out = args.out / "velocity.csv"
    write_csv(
        out,
        ["c_re", "c_im", "lambda", "velocity_abs", "velocity_rel", "n_tracks", "formation_step"],
        rows,
    )
    meta = _meta("sweep-velocity", vars(args) | {"out": str(args.out)})
    meta["experiment"] = sweep.metadata
    write_sidecar_meta(out, meta)

    series = []
    for c in sorted(set(r.c_coef for r in sweep.rows), key=lambda z: (abs(z), z.imag)):
        pts = [(r.lam, r.velocity_abs) for r in sweep.rows
               if r.c_coef == c and r.velocity_abs is not None]
        if len(pts) >= 2:
            series.append(Series(f"C = {c.real:g}+{c.imag:g}i",
                                 [p[0] for p in pts], [p[1] for p in pts]))
    if series:
        svg = args.out / "velocity.svg"
        render_svg_lineplot(series, "lambda", "velocity (domain/time)", svg,
                            title="structure velocity vs lambda")
        write_sidecar_meta(svg, meta)
    return 0


def _cmd_threshold(args) -> int:
    res = threshold_gradient(
        args.lam, complex(args.c_real, args.c_imag),
        (args.bracket_lo, args.bracket_hi), args.tol, mode=args.mode,
    )
    out = args.out / "threshold.csv"
    write_csv(
        out,
        ["lambda", "c_re", "c_im", "eps_lo", "eps_hi", "eps_star", "n_bisections"],
        [(res.lam, res.c_coef.real, res.c_coef.imag,
          res.epsilon_lo, res.epsilon_hi, res.epsilon_star, res.n_bisections)],
    )
    write_sidecar_meta(out, _meta("threshold", vars(args) | {"out": str(args.out)}))
    print(f"epsilon_star = {res.epsilon_star:.6g} "
          f"(bracket [{res.epsilon_lo:.6g}, {res.epsilon_hi:.6g}], "
          f"{res.n_bisections} bisections)")
    return 0


def _cmd_height_trace(args) -> int:
    c_list = [complex(args.c_real, im) for im in _float_list(args.c_imag_list)]
    if not c_list:
        raise UsageError("empty C list")
    bundle = height_vs_time(c_list, lam=args.lam)

    rows = []
    for trace in bundle.traces:
        by_step = {}
        for ev in trace.events:
            by_step.setdefault(ev.time_index, ev.kind)
        for step_idx, hgt in trace.series:
            rows.append((trace.c_coef.real, trace.c_coef.imag, step_idx, hgt,
                         by_step.get(step_idx)))
    out = args.out / "heights.csv"
    write_csv(out, ["c_re", "c_im", "step", "height", "event_kind"], rows)
    meta = _meta("height-trace", vars(args) | {"out": str(args.out)})
    meta["experiment"] = bundle.metadata
    write_sidecar_meta(out, meta)

    series = []
    markers = []
    seen = set()
    for trace in bundle.traces:
        if len(trace.series) >= 2:
            series.append(Series(f"C = {trace.c_coef.real:g}+{trace.c_coef.imag:g}i",
                                 [s for s, _ in trace.series],
                                 [h for _, h in trace.series]))
        for ev in trace.events:
            key = (ev.time_index, ev.kind)
            if key not in seen:
                seen.add(key)
                markers.append(EventMarker(float(ev.time_index), ev.kind))
    if series:
        svg = args.out / "heights.svg"
        render_svg_lineplot(series, "step", "structure height", svg,
                            events=markers, title="dominant structure height")
        write_sidecar_meta(svg, meta)
    return 0


def _cmd_gl_compare(args) -> int:
    c = complex(args.c_real, args.c_imag)
    k_re = args.k_real if args.k_real is not None else c.real
    k_im = args.k_imag if args.k_imag is not None else c.imag
    cfg = SimulationConfig(
        grid=GridSpec(args.n), lam=args.lam, c_coef=c, dt=args.dt,
        n_steps=args.steps, snapshot_stride=args.stride, ic=Uniform(1.0),
    )
    gl = GLConfig(gamma=args.gamma, k_gamma=complex(k_re, k_im),
                  memory_length=args.memory if args.memory > 0 else None)
    table = compare_lambda_gl(cfg, gl)

    out = args.out / "gl_compare.csv"
    write_csv(out, ["step", "l2_dist", "max_dist"],
              list(zip(table.time_indices, table.l2, table.linf)))
    meta = _meta("gl-compare", vars(args) | {"out": str(args.out)})
    meta["summary"] = {
        "max_l2": table.max_l2, "mean_l2": table.mean_l2,
        "max_linf": table.max_linf, "mean_linf": table.mean_linf,
    }
    write_sidecar_meta(out, meta)
    print(f"max L2 divergence {table.max_l2:.6g}, time-averaged {table.mean_l2:.6g}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep-velocity": _cmd_sweep_velocity,
    "threshold": _cmd_threshold,
    "height-trace": _cmd_height_trace,
    "gl-compare": _cmd_gl_compare,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        step = getattr(exc, "step_index", None)
        where = f" at step {step}" if step is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return 2
    except EmptySeries as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run_cli()


if __name__ == "__main__":
    sys.exit(main())
