"""Command-line front end.

Subcommands: ``angle``, ``landscape``, ``qplane``, ``field``, ``simulate`` and
``figures``.  Exit codes: 0 success, 2 usage, 3 positivity, 4 off-surface.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .control import Frame, control_from_angle
from .errors import CharacteristicInput, OffSurfaceError, PolicyFrameError, PositivityError
from .fields import (
    control_field_qplane,
    fp_landscape,
    lift,
    surface_grid,
    sweep_surface,
)
from .geometry import ScalarField, constant_field, ellipsoid_field, sphere_field
from .optimizer import (
    asymptotic_constants,
    optimal_angle_asymptotic,
    optimal_angle_grid,
    optimal_angle_stationary,
    optimal_control,
)
from .simulate import Policy, SimConfig, estimate_value_p

EXIT_OK, EXIT_USAGE, EXIT_POSITIVITY, EXIT_GEOMETRY = 0, 2, 3, 4

PRESETS = {
    "landscape": {
        "fig1": dict(alpha=0.0, p=10.0, lambda1=1.0, lambda2=0.0, r=1.0, q_min=0.0, q_max=1.0,
                     q_count=201, theta_min=0.0, theta_max=math.pi, theta_count=181),
        "fig2": dict(alpha=math.pi / 4, p=10.0, lambda1=1.0, lambda2=0.0, r=1.0, q_min=0.0, q_max=1.0,
                     q_count=201, theta_min=0.0, theta_max=math.pi, theta_count=181),
    },
    "qplane": {
        "fig3": dict(p=10.0, lambda1=1.0, lambda2=0.0, r=1.0, q_lim=1.0, n=41),
        "fig4": dict(p=5.0, lambda1=1.0, lambda2=0.0, r=1.0, q_lim=1.0, n=41),
    },
    "field": {
        "fig5": dict(surface="sphere", p=5.0, n_lat=13, n_lon=16, shift=2.0),
        "fig6": dict(surface="ellipsoid", p=5.0, n_lat=13, n_lon=16, shift=2.0),
    },
}


class UsageError(Exception):
    def __init__(self, flag, message):
        self.flag = flag
        super().__init__(f"{flag}: {message}")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    return format(float(x), ".17g")


def _floats(text: str, n: int, flag: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(flag, f"expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise UsageError(flag, f"expected {n} finite comma-separated numbers, got {text!r}")
    return vals


def _matrix(text: str):
    a, b, c, d = _floats(text, 4, "--M")
    if abs(b - c) > 1e-12 * (1.0 + max(abs(a), abs(b), abs(c), abs(d))):
        raise UsageError("--M", f"matrix must be symmetric, got off-diagonals {b} and {c}")
    return np.array([[a, b], [c, d]])


def _check_p(p):
    if not p > 1:
        raise UsageError("--p", f"p must be > 1, got {p}")
    return p


# --------------------------------------------------------------------------- output

def _emit(records, header, args):
    if args.format == "json":
        text = json.dumps(records if len(records) != 1 or args.command != "angle" else records[0],
                          indent=2)
        text += "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([rec[h] if isinstance(rec[h], str) else fmt(rec[h]) for h in header])
        text = buf.getvalue()
    _write(text, args.out)


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# --------------------------------------------------------------------------- commands

def cmd_angle(args):
    if (args.q is None) == (not args.characteristic):
        raise UsageError("--q", "give exactly one of --q or --characteristic")
    m = _matrix(args.M)
    if args.characteristic:
        frame = Frame(1.0, (0.0, 0.0), m)
        nu, res = optimal_control(frame, 2.0)
        rec = dict(branch="characteristic-max-eigenvalue", theta_characteristic=res.theta_star,
                   value=res.value, lambda1=frame.lambda1, lambda2=frame.lambda2,
                   degenerate=res.degenerate, nu11=nu[0, 0], nu12=nu[0, 1], nu22=nu[1, 1])
        header = list(rec)
        _emit([rec], header, args)
        return EXIT_OK
    p = _check_p(args.p)
    q = _floats(args.q, 2, "--q")
    frame = Frame(args.r, q, m)  # PositivityError -> exit 3
    if frame.qnorm == 0.0:
        raise UsageError("--q", "q = 0; use --characteristic")
    grid = optimal_angle_grid(frame, p, args.grid_n)
    stat = optimal_angle_stationary(frame, p)
    asym = optimal_angle_asymptotic(frame, p)
    c = asymptotic_constants(frame)
    nu, _ = optimal_control(frame, p, "stationary")
    rec = dict(theta_grid=grid.theta_star, theta_stationary=stat.theta_star,
               theta_asymptotic=asym.theta_star, value=stat.value, C1=c.C1, C2=c.C2, Cbar=c.Cbar,
               degenerate=bool(grid.degenerate or stat.degenerate),
               regime_warning=asym.regime_warning, alpha=frame.working_frame().alpha,
               lambda1=frame.lambda1, lambda2=frame.lambda2,
               nu11=nu[0, 0], nu12=nu[0, 1], nu22=nu[1, 1])
    _emit([rec], list(rec), args)
    return EXIT_OK


def _landscape_records(args):
    if args.q_count < 2 or args.theta_count < 2 or not args.q_max > args.q_min or args.q_min < 0:
        raise UsageError("--q-min/--q-max/--q-count", "need 0 <= q-min < q-max and q-count >= 2")
    if not args.theta_max > args.theta_min:
        raise UsageError("--theta-min/--theta-max", "need theta-min < theta-max")
    grid = fp_landscape(args.alpha, _check_p(args.p), args.lambda1, args.lambda2, args.r,
                        (args.q_min, args.q_max, args.q_count),
                        (args.theta_min, args.theta_max, args.theta_count))
    best = np.argmax(grid.values, axis=1)
    recs = []
    for j, t in enumerate(grid.theta_axis):
        for i, qn in enumerate(grid.q_axis):
            recs.append(dict(theta=t, qsq=qn * qn, f_value=grid.values[i, j], is_argmax=bool(best[i] == j)))
    return recs


def cmd_landscape(args):
    _emit(_landscape_records(args), ["theta", "qsq", "f_value", "is_argmax"], args)
    return EXIT_OK


QPLANE_HEADER = ["q1", "q2", "cx", "cy", "theta_star", "characteristic", "regime_warning"]


def _qplane_records(args):
    if args.n < 2 or not args.q_lim > 0:
        raise UsageError("--n/--q-lim", "need n >= 2 and q-lim > 0")
    samples = control_field_qplane(_check_p(args.p), args.lambda1, args.lambda2, args.r,
                                   args.q_lim, args.n)
    return [dict(q1=s.q[0], q2=s.q[1], cx=s.control_direction[0], cy=s.control_direction[1],
                 theta_star=s.theta_star, characteristic=s.characteristic,
                 regime_warning=s.regime_warning) for s in samples]


def cmd_qplane(args):
    _emit(_qplane_records(args), QPLANE_HEADER, args)
    return EXIT_OK


FIELD_HEADER = ["x1", "x2", "x3", "nx", "ny", "cx", "cy", "characteristic", "lambda1", "lambda2"]
FIELD_EXTRA = ["cx3", "degenerate"]

_EXPR_NS = {name: getattr(np, name) for name in
            ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "arctan", "abs", "pi")}


def field_from_expression(text: str) -> ScalarField:
    """Value-only field from an expression in x1, x2, x3 (numpy syntax)."""
    code = compile(text.strip(), "<field>", "eval")

    def value(x):
        x = np.asarray(x, dtype=float)
        ns = dict(_EXPR_NS, x1=x[..., 0], x2=x[..., 1], x3=x[..., 2])
        return np.asarray(eval(code, {"__builtins__": {}}, ns), dtype=float) + 0.0 * x[..., 0]

    return ScalarField.from_function(value, name="expr")


def _read_points(path):
    pts = []
    with open(path) as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                pts.append([float(v) for v in row[:3]])
            except ValueError:
                continue  # header line
    if not pts:
        raise UsageError("--points-file", f"no points read from {path}")
    return [np.array(p) for p in pts]


def _field_records(args):
    if args.expr_file:
        u = field_from_expression(Path(args.expr_file).read_text())
        if not args.points_file:
            raise UsageError("--points-file", "required with --expr-file")
    else:
        u = {"sphere": sphere_field, "ellipsoid": ellipsoid_field}[args.surface]()
    if args.points_file:
        points = _read_points(args.points_file)
    else:
        kind = "sphere_unit_c001" if args.surface == "sphere" else "ellipsoid_2x2_y2_z2"
        if args.n_lat < 4 or args.n_lon < 4:
            raise UsageError("--n-lat/--n-lon", "must be >= 4")
        points = surface_grid(kind, args.n_lat, args.n_lon)
    samples = sweep_surface(u, points, _check_p(args.p), args.shift, args.char_tol)
    recs = []
    for s in samples:
        n = s.horizontal_normal
        rec = dict(x1=s.point[0], x2=s.point[1], x3=s.point[2],
                   nx=None if n is None else n[0], ny=None if n is None else n[1],
                   cx=s.control_direction[0], cy=s.control_direction[1],
                   characteristic=s.characteristic, lambda1=s.frame.lambda1, lambda2=s.frame.lambda2,
                   cx3=lift(s.point, s.control_direction)[2], degenerate=s.result.degenerate)
        recs.append(rec)
    return recs


def cmd_field(args):
    header = FIELD_HEADER + (FIELD_EXTRA if args.extra else [])
    _emit(_field_records(args), header, args)
    return EXIT_OK


def cmd_simulate(args):
    if args.seed is None:
        raise UsageError("--seed", "a seed is required for simulate")
    p = _check_p(args.p)
    x0 = np.array(_floats(args.x0, 3, "--x0"))
    try:
        cfg = SimConfig(args.t0, args.T, args.dt, args.n_paths, args.seed)
    except ValueError as exc:
        raise UsageError("--t0/--T/--dt/--n-paths/--seed", str(exc)) from None
    if args.field == "const":
        g = constant_field(args.const_value)
        shape = None
    else:
        shape = {"sphere": sphere_field, "ellipsoid": ellipsoid_field}[args.field]()
        g = shape.shifted(args.shift)
    policies = []
    for k in range(args.n_const):
        phi = math.pi * k / args.n_const
        policies.append(Policy.constant(control_from_angle(phi), label=f"constant_{phi:.6f}"))
    if shape is not None and not args.no_feedback:
        policies.append(Policy.feedback(shape, p, r_shift=args.shift, label="feedback"))
    if not policies:
        raise UsageError("--n-const", "no policies to evaluate")
    est = estimate_value_p(x0, g, p, policies, cfg, scheme=args.scheme, threads=args.threads)
    summary = dict(value=est.value, p=p, n_paths=est.n_paths, seed=est.seed, n_steps=cfg.n_steps,
                   scheme=args.scheme,
                   policies=[dict(label=e.label, estimate=e.estimate, stderr=e.stderr)
                             for e in est.per_policy])
    _write(json.dumps(summary, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_figures(args):
    """Write the data for every figure preset into a directory."""
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parser = build_parser()
    jobs = [
        ("fig1.csv", ["landscape", "--preset", "fig1"]),
        ("fig2_left.csv", ["landscape", "--preset", "fig1"]),
        ("fig2_right.csv", ["landscape", "--preset", "fig2"]),
        ("fig3.csv", ["qplane", "--preset", "fig3"]),
        ("fig4_p5.csv", ["qplane", "--preset", "fig4"]),
        ("fig4_p30.csv", ["qplane", "--preset", "fig4", "--p", "30"]),
        ("fig5.csv", ["field", "--preset", "fig5", "--extra"]),
        ("fig6.csv", ["field", "--preset", "fig6", "--extra"]),
    ]
    for name, argv in jobs:
        sub = _parse(parser, argv + ["--out", str(out / name)])
        sub.func(sub)
    return EXIT_OK


# --------------------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heisenberg-mcf", description=__doc__.splitlines()[0])
    sp = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="csv"):
        p.add_argument("--config", help="key = value file; explicit flags override it")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    a = sp.add_parser("angle", help="maximising angle by all methods")
    common(a, "json")
    a.add_argument("--r", type=float, default=1.0)
    a.add_argument("--q", help="q1,q2")
    a.add_argument("--characteristic", action="store_true", help="q = 0 branch")
    a.add_argument("--M", required=True, help="row-major m11,m12,m21,m22")
    a.add_argument("--p", type=float, default=10.0)
    a.add_argument("--grid-n", type=int, default=1024)
    a.set_defaults(func=cmd_angle)

    l = sp.add_parser("landscape", help="f_p over (theta, |q|^2)")
    common(l)
    l.add_argument("--preset", choices=sorted(PRESETS["landscape"]))
    for name, default in (("alpha", 0.0), ("p", 10.0), ("lambda1", 1.0), ("lambda2", 0.0), ("r", 1.0),
                          ("q-min", 0.0), ("q-max", 1.0), ("theta-min", 0.0), ("theta-max", math.pi)):
        l.add_argument(f"--{name}", type=float, default=default)
    l.add_argument("--q-count", type=int, default=201)
    l.add_argument("--theta-count", type=int, default=181)
    l.set_defaults(func=cmd_landscape)

    qp = sp.add_parser("qplane", help="optimal control direction over the q-plane")
    common(qp)
    qp.add_argument("--preset", choices=sorted(PRESETS["qplane"]))
    for name, default in (("p", 10.0), ("lambda1", 1.0), ("lambda2", 0.0), ("r", 1.0), ("q-lim", 1.0)):
        qp.add_argument(f"--{name}", type=float, default=default)
    qp.add_argument("--n", type=int, default=41)
    qp.set_defaults(func=cmd_qplane)

    f = sp.add_parser("field", help="horizontal normal and control direction on a surface")
    common(f)
    f.add_argument("--preset", choices=sorted(PRESETS["field"]))
    f.add_argument("--surface", choices=("sphere", "ellipsoid"), default="sphere")
    f.add_argument("--expr-file", help="file holding an expression in x1, x2, x3")
    f.add_argument("--points-file", help="CSV of x1,x2,x3 points on the surface")
    f.add_argument("--p", type=float, default=5.0)
    f.add_argument("--n-lat", type=int, default=13)
    f.add_argument("--n-lon", type=int, default=16)
    f.add_argument("--shift", type=float, default=2.0, help="r = u + shift")
    f.add_argument("--char-tol", type=float, default=1e-10)
    f.add_argument("--extra", action="store_true", help="append cx3 (lifted) and degenerate columns")
    f.set_defaults(func=cmd_field)

    s = sp.add_parser("simulate", help="Monte-Carlo p-value estimate")
    common(s, "json")
    s.add_argument("--field", choices=("sphere", "ellipsoid", "const"), default="sphere")
    s.add_argument("--const-value", type=float, default=1.0)
    s.add_argument("--shift", type=float, default=2.0, help="payoff g = u + shift")
    s.add_argument("--x0", default="1,0,1")
    s.add_argument("--p", type=float, default=5.0)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--T", type=float, default=0.1)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--n-paths", type=int, default=4000)
    s.add_argument("--seed", type=int)
    s.add_argument("--n-const", type=int, default=4)
    s.add_argument("--no-feedback", action="store_true")
    s.add_argument("--scheme", choices=("heun", "euler"), default="heun")
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    fg = sp.add_parser("figures", help="write every figure preset to a directory")
    fg.add_argument("--config")
    fg.add_argument("--out-dir", required=True)
    fg.set_defaults(func=cmd_figures)
    return ap


def _config_tokens(path):
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("--config", f"malformed line {raw!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if val.lower() in ("true", "yes"):
            tokens.append(flag)
        elif val.lower() in ("false", "no"):
            continue
        else:
            tokens += [flag, val]
    return tokens


def _parse(parser, argv):
    argv = list(argv)
    if "--config" in argv[1:]:
        i = argv.index("--config")
        argv = argv[:1] + _config_tokens(argv[i + 1]) + argv[1:]
    ns = parser.parse_args(argv)
    preset = getattr(ns, "preset", None)
    if preset:
        # preset values apply only where the flag was not given explicitly
        given = {t.split("=")[0].lstrip("-").replace("-", "_") for t in argv if t.startswith("--")}
        for key, val in PRESETS[ns.command][preset].items():
            if key not in given:
                setattr(ns, key, val)
    return ns


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, CharacteristicInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PositivityError, PolicyFrameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except OffSurfaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
