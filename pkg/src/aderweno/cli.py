"""Batch front-end: runs, convergence studies, comparisons, exact profiles.

Verbs:
  run           execute one configured run, write snapshots/cuts/report
  convergence   run a grid sequence and tabulate norms and observed orders
  compare       tabulate L1 / total variation / shock position for two runs
  riemann-exact dump an exact Euler or RHD Riemann profile to a file

Exit codes: 0 success; 2 configuration or validation error; 3 recovery or
admissibility failure; 4 predictor failure; 5 NaN or time-step collapse;
6 I/O error.  Output files are written atomically (temp + rename) and are
byte-reproducible for a fixed configuration on one platform.
"""

import argparse
import os
import sys
import time

import numpy as np

from .config import Config, ConfigError, RunConfig
from .fluxes import OsherError
from .predictor import PredictorError
from .problems import get_problem, list_problems
from .problems.reference import (ReferenceProfile, cell_averages_1d,
                                 cell_averages_2d, error_norm,
                                 load_reference_profile, observed_orders,
                                 shock_position, total_variation)
from .problems.setups import _params_dict
from .solver import SolverError
from .systems import RecoveryError

EXIT_VALIDATION = 2
EXIT_RECOVERY = 3
EXIT_PREDICTOR = 4
EXIT_NAN = 5
EXIT_IO = 6


# --------------------------------------------------------------- file output

def _write_text(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_table_2d(path, header_lines, rows):
    body = [f"# {line}" for line in header_lines]
    body += [" ".join(f"{v:.17g}" for v in row) for row in rows]
    _write_text(path, "\n".join(body) + "\n")


def _snapshot_paths(rc, index):
    snap = os.path.join(rc.outdir, f"{rc.prefix}-{index:03d}.txt")
    cut = os.path.join(rc.outdir, f"{rc.prefix}-cut-{index:03d}.txt")
    return snap, cut


def _write_snapshot(rc, prob, solver, t, Q, index):
    """One text file per snapshot time: cell centers plus primitives."""
    sys_ = solver.system
    grid = solver.grid
    V = sys_.cons2prim(Q, diagnostic=True)
    names = sys_.variable_names
    snap_path, cut_path = _snapshot_paths(rc, index)
    if grid.ndim == 1:
        prof = ReferenceProfile(
            grid.centers(0), V, names, system=sys_.name, time=t,
            comments=(f"problem = {prob.name}", f"grid = {grid.nx}"))
        prof.write(snap_path)
        return
    xc, yc = grid.centers(0), grid.centers(1)
    rows = np.empty((grid.nx * grid.ny, 2 + len(names)))
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    rows[:, 0] = X.ravel()
    rows[:, 1] = Y.ravel()
    rows[:, 2:] = V.reshape(-1, len(names))
    _write_table_2d(snap_path,
                    (f"problem = {prob.name}",
                     f"system = {sys_.name}",
                     f"time = {t:.17g}",
                     f"grid = {grid.nx} {grid.ny}",
                     f"columns = x y {' '.join(names)}"),
                    rows)
    if rc.cut_axis is None:
        return
    # nearest-row 1D cut: cut_axis is the abscissa, cut_coord fixes the
    # other coordinate
    want = list(rc.variables) if rc.variables else list(names)
    cols = [names.index(nm) for nm in want]
    coord = 0.0 if rc.cut_coord is None else rc.cut_coord
    if rc.cut_axis == "x":
        j = int(np.argmin(np.abs(yc - coord)))
        prof = ReferenceProfile(
            xc, V[:, j, cols], want, system=sys_.name, time=t,
            comments=(f"problem = {prob.name}",
                      f"cut along x at y = {yc[j]:.17g}"))
    else:
        i = int(np.argmin(np.abs(xc - coord)))
        prof = ReferenceProfile(
            yc, V[i][:, cols], want, system=sys_.name, time=t,
            comments=(f"problem = {prob.name}",
                      f"cut along y at x = {xc[i]:.17g}"))
    prof.write(cut_path)


# ------------------------------------------------------------------- norms

def _reference_averages(prob, solver, t):
    """Cell-averaged reference primitives at time t, or None."""
    grid = solver.grid
    params = _params_dict(solver.system)
    if prob.reference_kind == "analytic":
        f = prob.analytic_reference(params)
        x0 = grid.box[0][0]
        xe = x0 + np.arange(grid.nx + 1) * grid.dx
        if grid.ndim == 1:
            return cell_averages_1d(lambda x: f(x, 0.0, t), xe)
        y0 = grid.box[1][0]
        ye = y0 + np.arange(grid.ny + 1) * grid.dy
        return cell_averages_2d(lambda x, y: f(x, y, t), xe, ye)
    if prob.reference_kind == "exact-rp" and grid.ndim == 1:
        rp, x0 = prob.exact_riemann(params)
        xe = grid.box[0][0] + np.arange(grid.nx + 1) * grid.dx
        return cell_averages_1d(lambda x: rp.profile(x, t, x0=x0), xe)
    return None


def _norm_lines(prob, solver, Q, t):
    ref = _reference_averages(prob, solver, t)
    if ref is None:
        return []
    sys_ = solver.system
    V = sys_.cons2prim(Q, diagnostic=True)
    grid = solver.grid
    vol = np.full(V[..., 0].size, grid.dx * grid.dy)
    lines = []
    for k, name in enumerate(sys_.variable_names):
        diff = V[..., k].ravel()
        rf = ref[..., k].ravel()
        lines.append(f"L1_{name} = {error_norm(diff, rf, vol, 'L1'):.17g}")
        lines.append(f"L2_{name} = {error_norm(diff, rf, vol, 'L2'):.17g}")
    return lines


# --------------------------------------------------------------------- run

def _cmd_run(args):
    cfg = Config.from_file(args.config)
    for assignment in args.set or ():
        cfg.apply_set(assignment)
    rc = RunConfig.from_config(cfg)
    prob, solver, Q0 = rc.setup()
    os.makedirs(rc.outdir, exist_ok=True)

    t_final = rc.t_final
    times = rc.snapshots if rc.snapshots is not None else (t_final,)
    times = sorted(t for t in times if 0.0 < t <= t_final + 1.0e-12)
    _write_snapshot(rc, prob, solver, 0.0, Q0, 0)
    state = {"index": 0}

    def on_snapshot(t, Q):
        state["index"] += 1
        _write_snapshot(rc, prob, solver, t, Q, state["index"])

    wall0 = time.perf_counter()
    Q, report = solver.run(Q0, 0.0, t_final, snap_times=times,
                           on_snapshot=on_snapshot)
    wall = time.perf_counter() - wall0
    if abs(report["t_final"] - t_final) > 1.0e-10 * max(1.0, t_final):
        raise SolverError("nan", f"run stalled at t = {report['t_final']}")
    if times and abs(times[-1] - t_final) < 1.0e-12:
        pass  # final state was already written by the snapshot callback
    else:
        state["index"] += 1
        _write_snapshot(rc, prob, solver, report["t_final"], Q,
                        state["index"])

    core = report["cons2prim_core"]
    # the primitive pipeline performs exactly one core recovery per cell
    # per step; anything else is a bug
    if rc.pipeline == "prim":
        assert core == report["steps"] * report["ncells"], \
            (core, report["steps"], report["ncells"])

    lines = [f"problem = {rc.problem}",
             f"pipeline = {rc.pipeline}",
             f"M = {rc.M}",
             f"flux = {rc.flux}",
             f"steps = {report['steps']}",
             f"t_final = {report['t_final']:.17g}",
             f"ncells = {report['ncells']}",
             f"cons2prim_core = {report['cons2prim_core']}",
             f"cons2prim_diagnostic = {report['cons2prim_diagnostic']}",
             f"picard_histogram = " +
             " ".join(str(int(v)) for v in report["picard_histogram"]),
             f"ab_fallbacks = {report['ab_fallbacks']}",
             f"fallback_cells = {report['fallback_cells']}"]
    lines += _norm_lines(prob, solver, Q, report["t_final"])
    report_path = os.path.join(rc.outdir, f"{rc.prefix}-report.txt")
    _write_text(report_path, "\n".join(lines) + "\n")
    print(f"{rc.problem}: {report['steps']} steps to t = "
          f"{report['t_final']:.6g} in {wall:.2f} s; report in "
          f"{report_path}")
    return 0


# ------------------------------------------------------------- convergence

def _cmd_convergence(args):
    cfg = Config.from_file(args.config)
    for assignment in args.set or ():
        cfg.apply_set(assignment)
    rc = RunConfig.from_config(cfg)
    prob = get_problem(rc.problem)
    if prob.reference_kind not in ("analytic", "exact-rp"):
        raise ConfigError(f"problem {rc.problem!r} has no analytic or "
                          f"exact reference for convergence")
    grids = [int(tok) for tok in args.grids.split(",") if tok]
    if not grids:
        raise ConfigError("--grids needs a comma-separated list of sizes")
    aspect = prob.default_grid[1] / prob.default_grid[0] \
        if prob.ndim == 2 else 1.0
    var = args.variable

    rows = []
    for n in grids:
        rc_n = RunConfig.from_config(cfg)
        rc_n.nx = n
        rc_n.ny = int(round(n * aspect)) if prob.ndim == 2 else None
        prob_n, solver, Q0 = rc_n.setup()
        names = solver.system.variable_names
        if var not in names:
            raise ConfigError(f"unknown variable {var!r}; choose from "
                              f"{names}")
        wall0 = time.perf_counter()
        Q, report = solver.run(Q0, 0.0, rc_n.t_final)
        wall = time.perf_counter() - wall0
        ref = _reference_averages(prob_n, solver, report["t_final"])
        if ref is None:
            raise ConfigError(f"no usable reference for {rc.problem!r}")
        V = solver.system.cons2prim(Q, diagnostic=True)
        k = names.index(var)
        grid = solver.grid
        nvol = grid.nx * (grid.ny if grid.ndim == 2 else 1)
        vol = np.full(nvol, grid.dx * grid.dy)
        e1 = error_norm(V[..., k].ravel(), ref[..., k].ravel(), vol, "L1")
        e2 = error_norm(V[..., k].ravel(), ref[..., k].ravel(), vol, "L2")
        rows.append((n, e1, e2))
        print(f"N = {n}: L1({var}) = {e1:.6e}  L2({var}) = {e2:.6e}  "
              f"[{report['steps']} steps, {wall:.1f} s]", flush=True)

    ns = [r[0] for r in rows]
    o1 = observed_orders(ns, [r[1] for r in rows])
    o2 = observed_orders(ns, [r[2] for r in rows])
    head = f"{'N':>6} {'L1':>14} {'O(L1)':>7} {'L2':>14} {'O(L2)':>7}"
    text = [f"# {rc.problem} {var} M = {rc.M} pipeline = {rc.pipeline}",
            head]
    csv = ["N,L1,orderL1,L2,orderL2"]
    for i, (n, e1, e2) in enumerate(rows):
        s1 = f"{o1[i - 1]:.2f}" if i else ""
        s2 = f"{o2[i - 1]:.2f}" if i else ""
        text.append(f"{n:>6} {e1:>14.6e} {s1:>7} {e2:>14.6e} {s2:>7}")
        csv.append(f"{n},{e1:.17g},{s1},{e2:.17g},{s2}")
    print("\n".join(text))
    if args.output:
        base = args.output
        os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
        _write_text(base + ".txt", "\n".join(text) + "\n")
        _write_text(base + ".csv", "\n".join(csv) + "\n")
        print(f"wrote {base}.txt and {base}.csv")
    return 0


# ----------------------------------------------------------------- compare

def _load_profile(path):
    try:
        return load_reference_profile(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_compare(args):
    pa = _load_profile(args.a)
    pb = _load_profile(args.b)
    pref = _load_profile(args.reference) if args.reference else None
    names = [nm for nm in pa.columns if nm in pb.columns]
    if args.variables:
        names = [nm for nm in args.variables if nm in names]
    if not names:
        raise ConfigError("no common variables to compare")

    def l1(p, other, name):
        vol = np.gradient(p.x)
        return float(np.sum(vol * np.abs(p.column(name) -
                                         other(p.x, name))))

    header = ["variable", "L1_a", "L1_b", "TV_a", "TV_b", "xs_a", "xs_b"]
    if pref is not None:
        header += ["TV_ref", "xs_ref"]
    csv = [",".join(header)]
    for nm in names:
        ra = pref if pref is not None else pb
        rb = pref if pref is not None else pa
        va, vb = pa.column(nm), pb.column(nm)
        row = [nm,
               f"{l1(pa, ra, nm):.17g}", f"{l1(pb, rb, nm):.17g}",
               f"{total_variation(va):.17g}", f"{total_variation(vb):.17g}",
               f"{shock_position(pa.x, va):.17g}",
               f"{shock_position(pb.x, vb):.17g}"]
        if pref is not None:
            vr = pref.column(nm) if nm in pref.columns else None
            row += ["" if vr is None else f"{total_variation(vr):.17g}",
                    "" if vr is None else
                    f"{shock_position(pref.x, vr):.17g}"]
        csv.append(",".join(row))
    out = "\n".join(csv) + "\n"
    if args.output:
        _write_text(args.output, out)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(out)
    return 0


# ----------------------------------------------------------- riemann-exact

def _cmd_riemann_exact(args):
    prob = get_problem(args.problem)
    if prob.reference_kind != "exact-rp":
        raise ConfigError(f"problem {args.problem!r} has no exact Riemann "
                          f"solution")
    system = prob.make_system()
    params = _params_dict(system)
    rp, x0 = prob.exact_riemann(params)
    t = prob.t_final if args.time is None else args.time
    nx = args.nx
    a, b = prob.box[0]
    x = a + (np.arange(nx) + 0.5) * (b - a) / nx
    V = rp.profile(x, t, x0=x0)
    prof = ReferenceProfile(
        x, V, system.variable_names, system=system.name, time=t,
        comments=(f"problem = {prob.name}",
                  f"exact Riemann solution, pstar = {rp.pstar:.17g}, "
                  f"ustar = {rp.ustar:.17g}, pattern = {rp.pattern}"))
    prof.write(args.output)
    print(f"{prob.name}: pattern {rp.pattern}, p* = {rp.pstar:.9g}, "
          f"u* = {rp.ustar:.9g}; wrote {args.output}")
    return 0


# -------------------------------------------------------------------- main

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="aderweno",
        description="ADER-WENO finite-volume benchmark driver")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute one configured run")
    p.add_argument("config", help="path to a key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry ([section.]key=value)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("convergence", help="grid-refinement study")
    p.add_argument("config")
    p.add_argument("--grids", required=True,
                   help="comma-separated grid sizes, e.g. 100,120,140")
    p.add_argument("--variable", default="rho",
                   help="variable for the error norms (default rho)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("-o", "--output", help="basename for .txt/.csv tables")
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("compare", help="L1/TV/shock-position comparison")
    p.add_argument("a", help="first profile (snapshot or cut file)")
    p.add_argument("b", help="second profile")
    p.add_argument("--reference", help="optional reference profile")
    p.add_argument("--variables", nargs="*",
                   help="restrict to these variables")
    p.add_argument("-o", "--output", help="CSV output path (default stdout)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("riemann-exact",
                       help="dump an exact Riemann profile")
    p.add_argument("--problem", required=True,
                   help="registered Riemann problem (e.g. sod, rhd-rp1)")
    p.add_argument("--time", type=float, default=None,
                   help="sample time (default: the problem's final time)")
    p.add_argument("--nx", type=int, default=1000,
                   help="number of sample points (default 1000)")
    p.add_argument("-o", "--output", required=True, help="output file")
    p.set_defaults(func=_cmd_riemann_exact)

    p = sub.add_parser("problems", help="list registered problems")
    p.set_defaults(func=_cmd_problems)
    return ap


def _cmd_problems(args):
    for name in list_problems():
        prob = get_problem(name)
        grid = "x".join(str(n) for n in prob.default_grid)
        print(f"{name:<10} {prob.system_name:<14} {prob.ndim}d "
              f"{grid:>9} t = {prob.t_final:g}  {prob.description}")
    return 0


def main(argv=None):
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches EXIT_VALIDATION
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RecoveryError as exc:
        print(f"error: conserved-to-primitive recovery failed: {exc}",
              file=sys.stderr)
        return EXIT_RECOVERY
    except (PredictorError, OsherError) as exc:
        print(f"error: predictor failed: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except SolverError as exc:
        kind = getattr(exc, "kind", "config")
        print(f"error: {exc}", file=sys.stderr)
        if kind == "config":
            return EXIT_VALIDATION
        if kind == "admissibility":
            return EXIT_RECOVERY
        return EXIT_NAN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
