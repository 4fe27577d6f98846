"""Command-line front end: scans, fits, trajectories, surfaces.

Subcommands: bare-scan, energy-scan, fit-cavity, fit-fano, trajectory,
surface.  Every input file is validated before any computation starts;
outputs are CSV or JSON with 12 significant digits, byte-identical for
identical inputs.

Exit codes: 0 success, 2 bad input or schema, 3 fit non-convergence,
4 expectation mismatch (--expect), 5 trajectory with more than 10% failed
points.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_model import CavityParams, NuclearEnsemble
from .errors import DomainError, FanoCavityError, FitError, InputError
from .fitting import CavityContext, fit_bare_cavity, fit_fano
from .layersim import (
    DEFAULT_ENERGY_GRID,
    DEFAULT_ROCKING_GRID,
    energy_scan,
    load_stack,
    rocking_scan,
)
from .trajectory import (
    MODEL,
    ORACLE,
    OracleSetup,
    fit_arc,
    fit_line,
    q_surface,
    sweep_abundance,
    sweep_angle,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CONVERGENCE = 3
EXIT_EXPECT = 4
EXIT_TRAJECTORY = 5


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def fmt(value):
    """Locale-independent decimal with 12 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    return str(value)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    raise TypeError(f"not JSON serialisable: {type(value)!r}")


def _round12(obj):
    if isinstance(obj, float):
        return float(format(obj, ".12g"))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def write_output(path, payload, fmt_name):
    """Write rows + summary as CSV (comment-block summary) or JSON."""
    columns, rows, summary = payload["columns"], payload["rows"], payload.get("summary", {})
    lines = []
    if fmt_name == "csv":
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(fmt(v) for v in row))
        for key, value in summary.items():
            if isinstance(value, dict):
                inner = " ".join(f"{k}={fmt(v)}" for k, v in value.items())
                lines.append(f"# {key}: {inner}")
            else:
                lines.append(f"# {key}: {fmt(value)}")
        text = "\n".join(lines) + "\n"
    else:
        doc = {"columns": columns,
               "rows": [[_round12(v) for v in row] for row in rows]}
        doc.update(_round12(summary))
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def read_scan(path):
    """Two-column numeric text or the native JSON scan format."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read scan file {path}: {exc}")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
            rows = doc["rows"]
            grid = np.array([row[0] for row in rows], dtype=float)
            values = np.array([row[1] for row in rows], dtype=float)
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise CliError(f"{path}: not a valid scan JSON ({exc})")
    else:
        try:
            data = np.loadtxt(path, comments="#", delimiter=None, ndmin=2)
        except ValueError as exc:
            raise CliError(f"{path}: not two-column numeric text ({exc})")
        if data.shape[1] < 2:
            raise CliError(f"{path}: expected two columns, found {data.shape[1]}")
        grid, values = data[:, 0], data[:, 1]
    if grid.size < 2:
        raise CliError(f"{path}: scan needs at least 2 rows")
    return grid, values


def load_cavity_file(path):
    """Cavity parameter JSON: a fit-cavity output or a hand-written block."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read cavity file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})")
    if not isinstance(doc, dict):
        raise CliError(f"{path}: cavity file must be an object")
    known = {"theta_mode_mrad", "kappa_1e2omega0", "kappa_r_1e2omega0",
             "a", "phi", "regime", "residual_rms", "converged", "termination",
             "n_iterations", "uncertainties", "seed", "command", "version"}
    unknown = set(doc) - known
    if unknown:
        raise CliError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("theta_mode_mrad", "kappa_1e2omega0", "kappa_r_1e2omega0"):
        if key not in doc:
            raise CliError(f"{path}: missing key {key!r}")
        if not isinstance(doc[key], (int, float)) or isinstance(doc[key], bool):
            raise CliError(f"{path}: {key} must be a number")
    try:
        return CavityParams(
            theta_mode=float(doc["theta_mode_mrad"]) * 1e-3,
            kappa=float(doc["kappa_1e2omega0"]) * 1e-2,
            kappa_r=float(doc["kappa_r_1e2omega0"]) * 1e-2,
        )
    except DomainError as exc:
        raise CliError(f"{path}: {exc}")


def load_nuclear_file(path):
    """Optional ensemble overrides: gamma, g, n_ref, abundance."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read nuclear file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})")
    known = {"gamma", "g", "n_ref", "abundance"}
    unknown = set(doc) - known
    if unknown:
        raise CliError(f"{path}: unknown keys {sorted(unknown)}")
    defaults = NuclearEnsemble()
    try:
        return NuclearEnsemble(
            gamma=float(doc.get("gamma", defaults.gamma)),
            g=float(doc.get("g", defaults.g)),
            n_ref=float(doc.get("n_ref", defaults.n_ref)),
            abundance=float(doc.get("abundance", defaults.abundance)),
        )
    except (DomainError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}")


def check_expectations(result_dict, expect_path):
    """Compare fitted values against a reference file; raise on breach."""
    try:
        doc = json.loads(Path(expect_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read expect file {expect_path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{expect_path}: invalid JSON ({exc})")
    if not isinstance(doc, dict) or "params" not in doc or not isinstance(doc["params"], dict):
        raise CliError(f"{expect_path}: expected an object with a 'params' block")
    unknown = set(doc) - {"params", "rtol", "atol"}
    if unknown:
        raise CliError(f"{expect_path}: unknown keys {sorted(unknown)}")
    rtol = float(doc.get("rtol", 1e-3))
    atol = float(doc.get("atol", 0.0))
    breaches = []
    for key, ref in doc["params"].items():
        if key not in result_dict:
            raise CliError(f"{expect_path}: unknown parameter {key!r}")
        got = result_dict[key]
        if isinstance(ref, str) or isinstance(got, str):
            if got != ref:
                breaches.append(f"{key}: expected {ref!r}, got {got!r}")
        elif not math.isclose(float(got), float(ref), rel_tol=rtol, abs_tol=atol):
            breaches.append(f"{key}: expected {fmt(float(ref))}, got {fmt(float(got))}")
    if breaches:
        raise CliError("expectation mismatch: " + "; ".join(breaches), code=EXIT_EXPECT)


def _angle_grid(args, default=DEFAULT_ROCKING_GRID):
    lo = args.theta_min if args.theta_min is not None else default[0] * 1e3
    hi = args.theta_max if args.theta_max is not None else default[1] * 1e3
    points = args.points if args.points is not None else default[2]
    if points < 1 or hi <= lo:
        raise CliError("need theta-max > theta-min and at least 1 point")
    return np.linspace(lo * 1e-3, hi * 1e-3, points)


def cmd_bare_scan(args):
    stack = load_stack(args.stack)
    grid = _angle_grid(args)
    theta, r2 = rocking_scan(stack, grid)
    rows = [[t * 1e3, v] for t, v in zip(theta, r2)]
    write_output(args.out, {
        "columns": ["theta_mrad", "r2"],
        "rows": rows,
        "summary": {"command": "bare-scan", "stack": str(args.stack),
                    "seed": args.seed, "version": __version__},
    }, args.format)
    return EXIT_OK


def cmd_energy_scan(args):
    if args.theta is None:
        raise CliError("energy-scan requires --theta (mrad)")
    span = args.span if args.span is not None else DEFAULT_ENERGY_GRID[1]
    points = args.points if args.points is not None else DEFAULT_ENERGY_GRID[2]
    if points < 1 or span <= 0:
        raise CliError("need a positive span and at least 1 point")
    grid = np.linspace(-span, span, points)
    theta = args.theta * 1e-3

    if args.source == ORACLE:
        if args.stack is None:
            raise CliError("--source oracle requires --stack")
        stack = load_stack(args.stack)
        x, r2 = energy_scan(stack, theta, grid, abundance=args.abundance)
    else:
        if args.cavity is None:
            raise CliError("--source model requires --cavity")
        cavity = load_cavity_file(args.cavity)
        ensemble = load_nuclear_file(args.nuclear) if args.nuclear else NuclearEnsemble()
        if args.abundance is not None:
            ensemble = ensemble.with_abundance(args.abundance)
        from .core_model import reflectivity_spectrum

        x, r2 = grid, reflectivity_spectrum(grid, theta, cavity, ensemble)

    rows = [[xx, vv] for xx, vv in zip(x, r2)]
    write_output(args.out, {
        "columns": ["domega_gamma", "r2"],
        "rows": rows,
        "summary": {"command": "energy-scan", "source": args.source,
                    "theta_mrad": args.theta, "seed": args.seed,
                    "version": __version__},
    }, args.format)
    return EXIT_OK


def cmd_fit_cavity(args):
    grid, values = read_scan(args.infile)
    try:
        fit = fit_bare_cavity(grid, values, window=args.window)
    except (DomainError, FitError) as exc:
        raise CliError(f"fit-cavity: {exc}")
    result = fit.to_dict()
    result["seed"] = args.seed
    result["command"] = "fit-cavity"
    text = json.dumps(_round12(result), indent=2, default=_json_default) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    if not fit.converged:
        sys.stderr.write(f"fit-cavity: no convergence ({fit.termination})\n")
        return EXIT_NO_CONVERGENCE
    if args.expect:
        check_expectations(result, args.expect)
    return EXIT_OK


def cmd_fit_fano(args):
    grid, values = read_scan(args.infile)
    context = None
    if args.cavity:
        if args.theta is None:
            raise CliError("--cavity needs --theta to fix the working point")
        cavity = load_cavity_file(args.cavity)
        ensemble = load_nuclear_file(args.nuclear) if args.nuclear else NuclearEnsemble()
        if args.abundance is not None:
            ensemble = ensemble.with_abundance(args.abundance)
        context = CavityContext(cavity, ensemble, args.theta * 1e-3)
    try:
        fit = fit_fano(grid, values, context=context, mode=args.mode)
    except (DomainError, FitError) as exc:
        raise CliError(f"fit-fano: {exc}")
    result = fit.to_dict()
    result["seed"] = args.seed
    result["command"] = "fit-fano"
    text = json.dumps(_round12(result), indent=2, default=_json_default) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    if not fit.converged:
        sys.stderr.write(f"fit-fano: no convergence ({fit.termination})\n")
        return EXIT_NO_CONVERGENCE
    if args.expect:
        check_expectations(result, args.expect)
    return EXIT_OK


def _model_inputs(args):
    if args.cavity is None:
        raise CliError("--source model requires --cavity")
    cavity = load_cavity_file(args.cavity)
    ensemble = load_nuclear_file(args.nuclear) if args.nuclear else NuclearEnsemble()
    return cavity, ensemble


def _oracle_setup(args):
    if args.stack is None:
        raise CliError("--source oracle requires --stack")
    stack = load_stack(args.stack)
    try:
        return OracleSetup.from_stack(stack)
    except (FitError, DomainError) as exc:
        raise CliError(f"oracle setup failed: {exc}", code=EXIT_NO_CONVERGENCE)


def _parse_values(raw, what):
    try:
        values = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"bad {what} list {raw!r}: {exc}")
    if not values:
        raise CliError(f"empty {what} list")
    return values


def cmd_trajectory(args):
    oracle = None
    cavity = ensemble = None
    if args.source == ORACLE:
        oracle = _oracle_setup(args)
        theta_mode = oracle.cavity.theta_mode
    else:
        cavity, ensemble = _model_inputs(args)
        theta_mode = cavity.theta_mode

    if args.mode == "abundance":
        if args.theta is not None:
            theta = args.theta * 1e-3
        else:
            theta = theta_mode + args.offset * 1e-6
        controls = _parse_values(args.values or "1.0,0.7,0.5,0.3,0.1", "abundance")
        traj = sweep_abundance(theta, controls, cavity=cavity, ensemble=ensemble,
                               source=args.source, oracle=oracle)
        control_name = "abundance"
    else:
        abundance = args.abundance if args.abundance is not None else 1.0
        if args.values:
            offsets = _parse_values(args.values, "offset (urad)")
        else:
            points = args.points if args.points is not None else 25
            if points < 2:
                raise CliError("angle sweep needs at least 2 points")
            offsets = np.linspace(-50.0, 46.0, points).tolist()
        thetas = [theta_mode + off * 1e-6 for off in offsets]
        traj = sweep_angle(abundance, thetas, cavity=cavity, ensemble=ensemble,
                           source=args.source, oracle=oracle)
        # report the control as the offset in urad
        traj.points = [
            type(p)(control=off, q=p.q, pi_strength=p.pi_strength, ok=p.ok, note=p.note)
            for off, p in zip(offsets, traj.points)
        ]
        control_name = "dtheta_urad"

    rows = [[r["control"], r["re_q"], r["im_q"], r["pi"], r["source"], r["ok"]]
            for r in traj.to_rows()]
    summary = {"command": "trajectory", "mode": args.mode, "source": args.source,
               "seed": args.seed, "version": __version__}
    qs = traj.q_values()
    if qs.size >= 3:
        try:
            line = fit_line(qs)
            summary["line_fit"] = {"direction_rad": line.direction, "rms": line.rms,
                                   "anchor_re": line.anchor.real, "anchor_im": line.anchor.imag}
        except FanoCavityError:
            pass
    if qs.size >= 4:
        try:
            arc = fit_arc(qs)
            summary["arc_fit"] = {"center_re": arc.center.real, "center_im": arc.center.imag,
                                  "radius": arc.radius, "rms": arc.rms,
                                  "distortion": arc.distortion}
        except FanoCavityError:
            pass
    write_output(args.out, {
        "columns": [control_name, "re_q", "im_q", "pi", "source", "ok"],
        "rows": rows,
        "summary": summary,
    }, args.format)
    if traj.ok_fraction() < 0.9:
        sys.stderr.write(
            f"trajectory: only {traj.ok_fraction():.0%} of points succeeded\n")
        return EXIT_TRAJECTORY
    return EXIT_OK


def cmd_surface(args):
    oracle = None
    cavity = ensemble = None
    if args.source == ORACLE:
        oracle = _oracle_setup(args)
        theta_mode = oracle.cavity.theta_mode
    else:
        cavity, ensemble = _model_inputs(args)
        theta_mode = cavity.theta_mode

    offsets = (_parse_values(args.values, "offset (urad)") if args.values
               else np.linspace(-50.0, 46.0, args.points or 25).tolist())
    abundances = _parse_values(args.abundances or "1.0,0.7,0.5,0.3,0.1", "abundance")
    thetas = [theta_mode + off * 1e-6 for off in offsets]
    cells = q_surface(thetas, abundances, cavity=cavity, ensemble=ensemble,
                      source=args.source, oracle=oracle)
    rows = []
    for cell, off in zip(cells, (o for o in offsets for _ in abundances)):
        rows.append([off, cell.abundance,
                     cell.q.real if cell.ok else math.nan,
                     cell.q.imag if cell.ok else math.nan,
                     cell.pi_strength if cell.ok else math.nan,
                     args.source, cell.ok])
    write_output(args.out, {
        "columns": ["dtheta_urad", "abundance", "re_q", "im_q", "pi", "source", "ok"],
        "rows": rows,
        "summary": {"command": "surface", "source": args.source,
                    "seed": args.seed, "version": __version__},
    }, args.format)
    ok_fraction = sum(c.ok for c in cells) / len(cells) if cells else 0.0
    if ok_fraction < 0.9:
        sys.stderr.write(f"surface: only {ok_fraction:.0%} of cells succeeded\n")
        return EXIT_TRAJECTORY
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fanocavity",
        description="Simulate, fit and map Fano resonances of nuclear X-ray cavities.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--seed", type=int, default=0,
                       help="recorded in outputs; fixes any stochastic restart")
        p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("bare-scan", help="rocking curve of the bare stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--theta-min", type=float, help="mrad (default 2.0)")
    p.add_argument("--theta-max", type=float, help="mrad (default 2.7)")
    p.add_argument("--points", type=int)
    common(p)
    p.set_defaults(func=cmd_bare_scan)

    p = sub.add_parser("energy-scan", help="Fano spectrum versus probe detuning")
    p.add_argument("--stack", help="stack file (oracle source)")
    p.add_argument("--cavity", help="cavity parameter JSON (model source)")
    p.add_argument("--nuclear", help="nuclear ensemble JSON (model source)")
    p.add_argument("--source", choices=[MODEL, ORACLE], default=ORACLE)
    p.add_argument("--theta", type=float, help="grazing angle, mrad")
    p.add_argument("--abundance", type=float)
    p.add_argument("--span", type=float, help="half-span in units of gamma (default 200)")
    p.add_argument("--points", type=int)
    common(p)
    p.set_defaults(func=cmd_energy_scan)

    p = sub.add_parser("fit-cavity", help="fit the bare-cavity model to a rocking scan")
    p.add_argument("--in", dest="infile", required=True,
                   help="two-column text or native JSON scan")
    p.add_argument("--window", type=float,
                   help="restrict fit to +/- window (mrad) around the dip")
    p.add_argument("--expect", help="reference JSON; exit 4 on tolerance breach")
    common(p)
    p.set_defaults(func=cmd_fit_cavity)

    p = sub.add_parser("fit-fano", help="fit the Fano model to an energy scan")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--cavity", help="cavity JSON fixing the working point")
    p.add_argument("--nuclear")
    p.add_argument("--theta", type=float, help="grazing angle, mrad (with --cavity)")
    p.add_argument("--abundance", type=float)
    p.add_argument("--mode", choices=["q", "pi"], default="q")
    p.add_argument("--expect")
    common(p)
    p.set_defaults(func=cmd_fit_fano)

    p = sub.add_parser("trajectory", help="sweep q versus abundance or angle")
    p.add_argument("--mode", choices=["abundance", "angle"], required=True)
    p.add_argument("--source", choices=[MODEL, ORACLE], default=MODEL)
    p.add_argument("--stack")
    p.add_argument("--cavity")
    p.add_argument("--nuclear")
    p.add_argument("--theta", type=float,
                   help="fixed angle (mrad) for abundance sweeps")
    p.add_argument("--offset", type=float, default=42.0,
                   help="fixed angle offset from the mode (urad) if --theta absent")
    p.add_argument("--abundance", type=float,
                   help="fixed abundance for angle sweeps (default 1.0)")
    p.add_argument("--values", help="comma-separated sweep values "
                                    "(abundances, or offsets in urad)")
    p.add_argument("--points", type=int, help="angle sweep point count (default 25)")
    common(p)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("surface", help="q over a (angle offset x abundance) grid")
    p.add_argument("--source", choices=[MODEL, ORACLE], default=MODEL)
    p.add_argument("--stack")
    p.add_argument("--cavity")
    p.add_argument("--nuclear")
    p.add_argument("--values", help="comma-separated offsets in urad")
    p.add_argument("--abundances", help="comma-separated abundances")
    p.add_argument("--points", type=int)
    common(p)
    p.set_defaults(func=cmd_surface)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except FanoCavityError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
