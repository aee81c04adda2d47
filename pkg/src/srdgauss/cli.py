"""Command-line interface.

Exit codes: 0 success, 2 bad arguments, 3 model (or realization) file
rejected, 4 solver did not converge, 5 simulation z-score above 4.
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

from . import closed_forms, montecarlo, realization, solvers
from .convex import SolverError
from .model import ModelError, load_model

EXIT_OK, EXIT_ARGS, EXIT_MODEL, EXIT_SOLVER, EXIT_STATS = 0, 2, 3, 4, 5
LN2 = math.log(2.0)
CURVE_HEADER = ["D", "rate_nats", "rate_bits", "method", "valid"]
Z_LIMIT = 4.0

METHOD_ALIASES = {
    "sdp": solvers.Method.STATIONARY_SDP,
    "rwf": solvers.Method.RWF_VECTOR,
    "scalar": solvers.Method.SCALAR_CLOSED_FORM,
}


class UsageError(Exception):
    pass


def _bits(nats: float) -> float:
    return nats / LN2


def _parse_methods(text):
    out = []
    for name in text.split(","):
        name = name.strip()
        try:
            out.append(METHOD_ALIASES.get(name) or solvers.Method(name))
        except ValueError:
            raise UsageError(f"unknown method {name!r}")
    return out


def _write(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summary(text: str, out):
    # keep stdout clean when it carries the data
    (sys.stderr if out is None or out == "-" else sys.stdout).write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return repr(float(x))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _summary_line(label, nats, in_bits):
    return f"{label}: {_bits(nats):.6f} bits\n" if in_bits else f"{label}: {nats:.6f} nats\n"


def _grid(args):
    if not (args.dmin > 0 and args.dmax > args.dmin):
        raise UsageError("need 0 < dmin < dmax")
    if args.points < 2:
        raise UsageError("need at least 2 grid points")
    if args.log_grid:
        return np.geomspace(args.dmin, args.dmax, args.points)
    return np.linspace(args.dmin, args.dmax, args.points)


def cmd_curve(args) -> int:
    grid = _grid(args)
    methods = _parse_methods(args.methods)
    model = load_model(args.model)
    records = []
    for method in methods:
        try:
            points = solvers.sweep_curve(model, grid, method)
        except ValueError as exc:
            raise UsageError(str(exc))
        for pt in points:
            records.append({
                "D": pt.D, "rate_nats": pt.rate, "rate_bits": _bits(pt.rate),
                "method": pt.method, "valid": pt.valid,
            })
    if args.format == "json":
        text = _dump(records)
    else:
        text = _csv(CURVE_HEADER, [[_fmt(r["D"]), _fmt(r["rate_nats"]), _fmt(r["rate_bits"]),
                                    r["method"], _fmt(r["valid"])] for r in records])
    _write(text, args.out)
    return EXIT_OK


def _parse_split(text):
    try:
        parts = [float(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse split {text!r}")
    if len(parts) != 2:
        raise UsageError("split needs exactly two values")
    return parts


def cmd_counterexample(args) -> int:
    split = _parse_split(args.split)
    try:
        rep = closed_forms.counterexample_report(args.a, args.D, split)
    except ValueError as exc:
        raise UsageError(str(exc))
    sdp = solvers.srd_stationary(closed_forms.counterexample_model(args.a), args.D).rate
    out = rep.to_dict()
    out.update({
        "sdp_rate": sdp,
        "lhs_rate_bits": _bits(rep.lhs_rate),
        "rhs_rate_bits": _bits(rep.rhs_rate),
        "sdp_rate_bits": _bits(sdp),
    })
    _write(_dump(out), args.out)
    return EXIT_OK


def _check_positive_D(D):
    if not (D > 0 and math.isfinite(D)):
        raise UsageError("D must be positive")


def cmd_finite(args) -> int:
    _check_positive_D(args.D)
    if args.n < 0:
        raise UsageError("n must be non-negative")
    model = load_model(args.model)
    sol = solvers.srd_finite_horizon(model, args.D, args.n)
    steps = realization.information_rate_from_covariances(model, sol.P_seq)
    rows = [(t, float(np.trace(P)), r) for t, (P, r) in enumerate(zip(sol.P_seq, steps))]
    if args.format == "json":
        text = _dump({"n": sol.n, "D": args.D, "rate_nats": sol.rate, "rate_bits": _bits(sol.rate),
                      "steps": [{"t": t, "trace_P": tr, "step_rate_nats": r} for t, tr, r in rows]})
    else:
        text = _csv(["t", "trace_P", "step_rate_nats"], [[t, _fmt(tr), _fmt(r)] for t, tr, r in rows])
    _write(text, args.out)
    _summary(_summary_line("rate", sol.rate, args.bits), args.out)
    return EXIT_OK


def cmd_realize(args) -> int:
    _check_positive_D(args.D)
    if args.stationary == (args.n is not None):
        raise UsageError("give exactly one of --n or --stationary")
    if args.n is not None and args.n < 0:
        raise UsageError("n must be non-negative")
    model = load_model(args.model)
    if args.stationary:
        pt = solvers.srd_stationary(model, args.D)
        sensor = realization.stationary_sensor(model, pt.P_opt)
        rate = pt.rate
    else:
        sol = solvers.srd_finite_horizon(model, args.D, args.n)
        sensor = realization.sensor_from_covariances(model, sol.P_seq)
        rate = sol.rate
    _write(_dump(sensor.to_dict()), args.out)
    _summary(_summary_line("rate", rate, args.bits), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = montecarlo.SimulationConfig(args.trajectories, args.horizon, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    model = load_model(args.model)
    try:
        sensor = realization.SensorRealization.load(args.realization, p=model.p)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ModelError(f"cannot read realization: {exc}") from exc
    try:
        report = montecarlo.simulate(model, sensor, None, cfg)
    except (ValueError, IndexError) as exc:
        raise ModelError(str(exc)) from exc
    _write(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    sys.stderr.write(f"max_z_score: {report.max_z_score:.4f}\n")
    return EXIT_OK if report.max_z_score <= Z_LIMIT else EXIT_STATS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--bits", action="store_true", help="print summaries in bits")

    parser = _Parser(prog="srdgauss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("curve", parents=[common], help="rate-distortion curve sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--dmin", type=float, required=True)
    p.add_argument("--dmax", type=float, required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--methods", default="sdp,rwf",
                   help="comma list of sdp, rwf, scalar (or full method names)")
    p.add_argument("--log-grid", action="store_true")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("counterexample", parents=[common], help="two-mode counterexample")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--split", required=True, help="D1,D2")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("finite", parents=[common], help="finite-horizon program")
    p.add_argument("--model", required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_finite)

    p = sub.add_parser("realize", parents=[common], help="export the optimal sensor")
    p.add_argument("--model", required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--stationary", action="store_true")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of a sensor")
    p.add_argument("--model", required=True)
    p.add_argument("--realization", required=True)
    p.add_argument("--trajectories", type=int, default=10_000)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ARGS
    except ModelError as exc:
        sys.stderr.write(f"model error: {exc}\n")
        return EXIT_MODEL
    except SolverError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
