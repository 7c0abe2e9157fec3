"""Command-line interface.

Subcommands: residuals, conserved, invariance, solve, verify, list.
Exit codes: 0 success, 1 gated verification failure, 2 invalid input,
3 solver non-convergence.  All numbers are printed with 17 significant
digits so runs are reproducible and diffable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import expr, registry
from .dubois_reymond import cdur_residual, dr_quantity, dr_residual
from .errors import DelayVarError
from .euler_lagrange import Regime, regime_of, residual_grids
from .noether import constancy_report, invariance_defect, necessary_condition_defect, \
    noether_quantity
from .problem import AugmentedSetup, Integrand, TransformationGroup, problem_from_json
from .solver import CollocationScheme, solve_el, solve_pmp, verify
from .trajectory import Trajectory

FMT = "{:.17g}"


def _fmt(x) -> str:
    return FMT.format(float(x))


def _write_out(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _load_variational(args):
    """Resolve (problem, trajectory, lam) from --example / --problem flags."""
    if args.example:
        entry = registry.get(args.example)
        if entry.kind != "variational":
            raise DelayVarError(f"example {args.example!r} is a control problem")
        problem = entry.build()
        traj = entry.trajectory() if entry.trajectory else None
        lam = np.asarray(entry.lam, dtype=float)
    else:
        with open(args.problem, encoding="utf-8") as handle:
            problem = problem_from_json(handle.read())
        traj, lam = None, np.zeros(problem.k)
    if getattr(args, "trajectory", None):
        with open(args.trajectory, encoding="utf-8") as handle:
            traj = Trajectory.from_json(handle.read())
    if getattr(args, "lam", None) is not None:
        lam = np.asarray([float(v) for v in args.lam.split(",") if v.strip() != ""],
                         dtype=float)
    if traj is None:
        raise DelayVarError("no trajectory: pass --trajectory FILE or use an example "
                            "that ships one")
    return problem, traj, lam


def _group_from_exprs(args, problem):
    """eta/xi expressions over (t, q...) and an optional gauge expression."""
    table = {"t": 0, "q": 1}
    table.update({f"q{i}": 1 + i for i in range(problem.n)})
    binding = expr.TableBinding(table)
    eta_ast = expr.parse(args.eta)
    xi_asts = [expr.parse(s) for s in args.xi.split(",")]
    if len(xi_asts) == 1 and problem.n > 1:
        xi_asts = xi_asts * problem.n
    if len(xi_asts) != problem.n:
        raise DelayVarError(f"xi needs {problem.n} components, got {len(xi_asts)}")

    def eta(t, q):
        return float(expr.bind_eval(eta_ast, binding, [t, *np.atleast_1d(q)]))

    def xi(t, q):
        flat = [t, *np.atleast_1d(q)]
        return np.array([expr.bind_eval(a, binding, flat) for a in xi_asts], dtype=float)

    gauge = None
    if getattr(args, "gauge", None):
        gauge_ast = expr.parse(args.gauge)
        gauge = Integrand(expr.compiled(gauge_ast, expr.Binding(problem.m, problem.n)),
                          name=args.gauge)
    return TransformationGroup(eta=eta, xi=xi, gauge=gauge)


# ---------------------------------------------------------------------------
# subcommands


def cmd_residuals(args) -> int:
    problem, traj, lam = _load_variational(args)
    setup = AugmentedSetup(problem, lam)
    grids = residual_grids(problem, traj, count=args.grid)
    from .euler_lagrange import el_residual

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"el_{i}" for i in range(problem.n)]
                    + ["dr_quantity", "dr_residual", "cdur"])
    sup = {"el": 0.0, "dr_residual": 0.0, "cdur": 0.0}
    for regime in (Regime.FIRST, Regime.SECOND):
        ts = grids[regime].times
        el = el_residual(setup, traj, ts)
        drq = np.atleast_1d(dr_quantity(setup, traj, ts, regime))
        drr = np.atleast_1d(dr_residual(setup, traj, ts, regime))
        cd = np.full(len(ts), np.nan)
        in_cdur = ts <= problem.t2 - problem.tau
        if np.any(in_cdur):
            cd[in_cdur] = np.atleast_1d(cdur_residual(setup, traj, ts[in_cdur]))
        sup["el"] = max(sup["el"], float(np.max(np.linalg.norm(el, axis=1))))
        sup["dr_residual"] = max(sup["dr_residual"], float(np.max(np.abs(drr))))
        if np.any(in_cdur):
            sup["cdur"] = max(sup["cdur"], float(np.max(np.abs(cd[in_cdur]))))
        for j, t in enumerate(ts):
            row = [_fmt(t)] + [_fmt(v) for v in el[j]] + [_fmt(drq[j]), _fmt(drr[j])]
            row.append("" if np.isnan(cd[j]) else _fmt(cd[j]))
            writer.writerow(row)
    _write_out(buf.getvalue(), args.out)
    summary = json.dumps({"sup": sup, "grid": args.grid}, indent=2)
    if args.out not in (None, "-"):
        print(summary)
    elif args.json:
        print(summary)
    return 0


def cmd_conserved(args) -> int:
    problem, traj, lam = _load_variational(args)
    setup = AugmentedSetup(problem, lam)
    group = _group_from_exprs(args, problem)
    grids = residual_grids(problem, traj, count=args.grid)
    report = constancy_report(
        lambda t: noether_quantity(setup, group, traj, t, regime_of(problem, t)), grids)
    sup_cdur = float(np.max(np.abs(np.atleast_1d(
        cdur_residual(setup, traj, grids[Regime.FIRST].times)))))
    report.hypothesis_violated = sup_cdur > args.tol

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "regime", "C", "cdur_flag"])
    flag = "1" if report.hypothesis_violated else "0"
    for regime in (Regime.FIRST, Regime.SECOND):
        for t, c in zip(report.grids[regime].times, report.values[regime]):
            writer.writerow([_fmt(t), regime.value, _fmt(c), flag])
    _write_out(buf.getvalue(), args.out)
    summary = json.dumps({
        "mean": {r.value: report.means[r] for r in report.means},
        "deviation": {r.value: report.deviations[r] for r in report.deviations},
        "hypothesis_violated": report.hypothesis_violated,
    }, indent=2)
    if args.out not in (None, "-") or args.json:
        print(summary)
    return 0


def cmd_invariance(args) -> int:
    problem, traj, lam = _load_variational(args)
    setup = AugmentedSetup(problem, lam)
    group = _group_from_exprs(args, problem)
    defect = invariance_defect(setup, group, traj)
    nc1, nc2 = necessary_condition_defect(setup, group, traj)
    payload = {
        "invariance_defect": defect,
        "necessary_condition_defect": {"first": nc1, "second": nc2},
        "invariant_within_tol": abs(defect) <= args.tol,
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"invariance defect            {_fmt(defect)}")
        print(f"necessary condition (first)  {_fmt(nc1)}")
        print(f"necessary condition (second) {_fmt(nc2)}")
        print(f"invariant within {_fmt(args.tol)}: {'yes' if payload['invariant_within_tol'] else 'no'}")
    return 0


def cmd_solve(args) -> int:
    scheme = CollocationScheme(nodes=args.nodes, tolerance=args.tol,
                               max_iterations=args.maxiter)
    if args.example:
        entry = registry.get(args.example)
        problem = entry.build()
        kind = entry.kind
    else:
        with open(args.problem, encoding="utf-8") as handle:
            problem = problem_from_json(handle.read())
        kind = "variational"
    if kind == "control":
        triple, lam, report = solve_pmp(problem, scheme=scheme)
        payload = {
            "state": json.loads(triple.q.to_json()),
            "control": json.loads(triple.u.to_json()),
            "costate": json.loads(triple.p.to_json()),
            "lambda": [float(v) for v in lam],
            "report": report.to_dict(),
        }
    else:
        traj, lam, report = solve_el(problem, scheme=scheme)
        payload = {
            "trajectory": json.loads(traj.to_json()),
            "lambda": [float(v) for v in lam],
            "report": report.to_dict(),
        }
    _write_out(json.dumps(payload, indent=2) + "\n", args.out)
    return 0 if report.converged else 3


def cmd_verify(args) -> int:
    try:
        entry = registry.get(args.name)
    except KeyError:
        print(f"unknown example {args.name!r}; known: {', '.join(registry.names())}",
              file=sys.stderr)
        return 2
    checks = entry.checks()
    if args.json:
        print(json.dumps([{
            "check": c.name, "value": float(c.value), "threshold": float(c.threshold),
            "passed": bool(c.passed), "gated": bool(c.gated),
        } for c in checks], indent=2))
    else:
        width = max(len(c.name) for c in checks)
        print(f"{'check':<{width}}  {'value':>24}  {'threshold':>24}  status")
        for c in checks:
            name, value, threshold, status = c.row()
            print(f"{name:<{width}}  {value:>24}  {threshold:>24}  {status}")
    return 0 if all(c.passed for c in checks if c.gated) else 1


def cmd_list(args) -> int:
    for name in registry.names():
        entry = registry.get(name)
        print(f"{name:<16} [{entry.kind}]  {entry.summary}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayvar",
        description="Residuals, conservation laws, and collocation solvers for "
                    "isoperimetric variational problems with time delay.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(p, with_traj=True):
        p.add_argument("--example", help="built-in problem name (see `delayvar list`)")
        p.add_argument("--problem", help="problem JSON file")
        if with_traj:
            p.add_argument("--trajectory", help="trajectory JSON file")
            p.add_argument("--lambda", dest="lam",
                           help="comma-separated multiplier values")
        p.add_argument("--grid", type=int, default=200, help="grid point count")
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--out", help="output path (default: standard output)")
        p.add_argument("--json", action="store_true", help="machine-readable summary")

    p = sub.add_parser("residuals", help="Euler-Lagrange / DuBois-Reymond residual sweep")
    add_source(p)
    p.set_defaults(fn=cmd_residuals)

    p = sub.add_parser("conserved", help="Noether conserved-quantity report")
    add_source(p)
    p.add_argument("--eta", default="0", help="time generator expression in t, q")
    p.add_argument("--xi", default="0", help="state generator expression(s), comma-separated")
    p.add_argument("--gauge", help="gauge-term expression over the integrand arguments")
    p.set_defaults(fn=cmd_conserved)

    p = sub.add_parser("invariance", help="invariance defect under a transformation group")
    add_source(p)
    p.add_argument("--eta", default="0")
    p.add_argument("--xi", default="0")
    p.add_argument("--gauge")
    p.set_defaults(fn=cmd_invariance)

    p = sub.add_parser("solve", help="solve the delayed boundary-value problem")
    p.add_argument("--example")
    p.add_argument("--problem")
    p.add_argument("--nodes", type=int, default=64, help="collocation nodes per regime")
    p.add_argument("--tol", type=float, default=1e-6, help="residual tolerance")
    p.add_argument("--maxiter", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("verify", help="run a built-in example's verification suite")
    p.add_argument("name")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("list", help="list built-in examples")
    p.set_defaults(fn=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "example", None) is None and getattr(args, "problem", None) is None \
            and args.command in ("residuals", "conserved", "invariance", "solve"):
        print("need --example NAME or --problem FILE", file=sys.stderr)
        return 2
    if getattr(args, "example", None) is not None and args.command != "verify":
        if args.example not in registry.names():
            print(f"unknown example {args.example!r}; known: {', '.join(registry.names())}",
                  file=sys.stderr)
            return 2
    try:
        return args.fn(args)
    except (DelayVarError, OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
