"""Command-line entry point: ``generate``, ``compare`` and ``verify``.

Exit codes: 0 success, 1 solver or numerical failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io
from .metric import BoundSchedule, verify_sequence_conditions
from .objectives import DomainError
from .solvers import ALGORITHMS, NumericalFailure, StopRule, run

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

SIZE_FLAGS = {"deblur": ("m",), "cs": ("m", "n", "s"), "density": ("n",)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _solver_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in ALGORITHMS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown solver(s) {', '.join(bad) or '(none)'}; choose from {', '.join(ALGORITHMS)}")
    return sorted(set(names))


def build_parser():
    p = _Parser(prog="scaledfb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--experiment", required=True, choices=sorted(ex.GENERATORS))
        sp.add_argument("--seed", required=True, type=int)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--m", type=int, help="image side (deblur) or measurements (cs)")
        sp.add_argument("--n", type=int, help="unknowns (cs) or samples (density)")
        sp.add_argument("--s", type=int, help="nonzeros of the cs ground truth")
        sp.add_argument("--rho", type=float, help="regularization weight")

    g = sub.add_parser("generate", help="write a seeded instance and its manifest")
    common(g)

    c = sub.add_parser("compare", help="run solvers and write histories and tables")
    common(c)
    c.add_argument("--solvers", type=_solver_list, default=sorted(ALGORITHMS))
    c.add_argument("--max-iter", type=int, help="comparison budget per solver")
    c.add_argument("--tol", type=float,
                   help="stop when the relative iterate change drops below TOL (0 disables)")
    c.add_argument("--a", type=float, help="inertia parameter (>= 2)")
    c.add_argument("--alpha0", type=float, help="initial steplength")
    c.add_argument("--delta", type=float, help="backtracking factor in (0, 1)")
    c.add_argument("--b", type=float, help="metric bound constant")
    c.add_argument("--p", type=float, help="metric bound exponent (> 2)")
    c.add_argument("--ref-budget", type=int, help="reference iterations (>= 10x max-iter)")

    v = sub.add_parser("verify", help="check a finished compare directory")
    common(v)
    return p


# --- helpers ------------------------------------------------------------------------

def _sizes(args):
    sizes = {}
    for name in ("m", "n", "s"):
        val = getattr(args, name)
        if val is None:
            continue
        if name not in SIZE_FLAGS[args.experiment]:
            raise UsageError(f"--{name} does not apply to {args.experiment}")
        sizes[name] = val
    if args.rho is not None:
        if args.experiment == "density":
            raise UsageError("--rho does not apply to density")
        sizes["rho"] = args.rho
    return sizes


def _instance(args):
    try:
        return ex.generate(args.experiment, args.seed, **_sizes(args))
    except ValueError as err:
        raise UsageError(str(err)) from err


def _solver_settings(args):
    d = ex.DEFAULTS[args.experiment]
    s = {
        "max_iter": d.max_iter if args.max_iter is None else args.max_iter,
        "tol": d.stop_tol if args.tol is None else args.tol,
        "a": d.a if args.a is None else args.a,
        "alpha0": d.alpha0 if args.alpha0 is None else args.alpha0,
        "delta": 0.5 if args.delta is None else args.delta,
        "b": d.schedule_b if args.b is None else args.b,
        "p": d.schedule_p if args.p is None else args.p,
    }
    s["ref_budget"] = (max(d.reference_budget, 10 * s["max_iter"])
                       if args.ref_budget is None else args.ref_budget)
    s["ref_algorithm"] = d.reference_algorithm
    if s["ref_budget"] < 10 * s["max_iter"]:
        raise UsageError("--ref-budget must be at least 10x --max-iter")
    if s["tol"] < 0:
        raise UsageError("--tol must be nonnegative")
    return s


def _config(algorithm, s, schedule):
    stop = StopRule("iterate_rel_change", s["tol"]) if s["tol"] > 0 else StopRule()
    try:
        return ex.SolverConfig(algorithm=algorithm, alpha0=s["alpha0"], backtrack_delta=s["delta"],
                               a=s["a"], schedule=schedule, max_iter=s["max_iter"],
                               stop_rule=stop, keep_metrics=algorithm == "sfbem")
    except ValueError as err:
        raise UsageError(str(err)) from err


def _history_rows(out, F_star):
    gaps = ex.relative_gap(out.objective, F_star) if out.history else []
    return [{"k": r.k, "F": r.F, "gap": float(g), "alpha": r.alpha,
             "backtracks": r.backtracks, "time_s": r.time_s}
            for r, g in zip(out.history, gaps)]


def _trace_records(out):
    return [{"k": r.k, "alpha": r.alpha, "backtracks": r.backtracks, "gamma": r.gamma,
             "rel_change": r.rel_change, "f_plus": _num(r.f_plus), "model": _num(r.model),
             "bt_tol": r.bt_tol}
            for r in out.history]


def _num(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def _manifest(args, inst, settings=None):
    man = {"experiment": inst.kind, "seed": args.seed, "instance_hash": ex.instance_hash(inst),
           "sizes": inst.params()}
    if settings is not None:
        man["settings"] = settings
        man["solvers"] = list(args.solvers)
    return man


# --- commands ------------------------------------------------------------------------

def cmd_generate(args):
    inst = _instance(args)
    vmfb, manifest = ex.save_instance(inst, args.out)
    print(f"wrote {vmfb} and {manifest}")
    return EXIT_OK


def cmd_compare(args):
    inst = _instance(args)
    s = _solver_settings(args)
    schedule = BoundSchedule(s["b"], s["p"])
    configs = {alg: _config(alg, s, schedule) for alg in args.solvers}
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    ex.save_instance(inst, out_dir)

    problem = inst.problem()
    x_true = getattr(inst, "x_true", None)
    x_star, F_ref = ex.compute_reference(inst, s["ref_budget"], s["ref_algorithm"],
                                         cache_dir=out_dir / "cache")

    runs, trackers, failures = {}, {}, {}
    for alg in args.solvers:
        tracker = ex.ErrorTracker(x_star, x_true)
        try:
            runs[alg] = run(configs[alg], problem, inst.x0(), observer=tracker)
            trackers[alg] = tracker
        except (NumericalFailure, DomainError, ValueError) as err:
            failures[alg] = f"{type(err).__name__}: {err}"
            print(f"{alg}: failed ({failures[alg]})", file=sys.stderr)

    # no iterate may sit below the reference value
    F_star = min([F_ref] + [float(r.objective.min()) for r in runs.values() if r.history])

    summary_rows, curves, solvers_json = [], [], {}
    for alg in args.solvers:
        if alg in failures:
            summary_rows.append([alg, "", "", "", "", "failed", "", ""])
            solvers_json[alg] = {"status": "failed", "error": failures[alg]}
            continue
        out = runs[alg]
        rows = _history_rows(out, F_star)
        io.write_history_csv(out_dir / f"history_{alg}.csv", rows)
        io.write_jsonl(out_dir / f"trace_{alg}.jsonl", _trace_records(out))
        curves.extend([alg, r["k"], r["time_s"], r["gap"]] for r in rows)
        rep = ex.evaluate(out, F_star, tracker=trackers[alg])
        final_rre = trackers[alg].rre[-1] if trackers[alg].rre else None
        final_rme = trackers[alg].rme[-1] if trackers[alg].rme else None
        for row in rep.table:
            summary_rows.append([alg, row["tol"], "" if row["it"] is None else row["it"],
                                 "" if row["time_s"] is None else row["time_s"],
                                 "" if row["rme"] is None else row["rme"], out.status,
                                 len(out.history), "" if final_rre is None else final_rre])
        solvers_json[alg] = {
            "status": out.status, "iterations": len(out.history),
            "final_F": float(out.objective[-1]) if out.history else None,
            "final_rme": final_rme, "final_rre": final_rre,
            "iterations_to_tol": {repr(r["tol"]): r["it"] for r in rep.table},
        }
        if alg == "sfbem" and out.metrics:
            report = verify_sequence_conditions(out.metrics, schedule)
            io.write_jsonl(out_dir / "metric_report_sfbem.jsonl", report.records)
            solvers_json[alg]["metric_conditions_ok"] = report.ok
            solvers_json[alg]["tau_stable_from"] = report.stable_from
            solvers_json[alg]["tau_stable_from_schedule"] = report.stable_from_schedule

    io.write_csv(out_dir / "summary.csv",
                 ["solver", "tol", "iterations", "time_s", "rme", "status", "iterations_run",
                  "final_rre"], summary_rows)
    io.write_csv(out_dir / "curves.csv", ["solver", "k", "time_s", "gap"], curves)
    summary = _manifest(args, inst, s)
    summary.update({
        "F_reference": F_ref, "F_star": F_star, "tolerances": list(ex.TOLERANCES),
        "rre_data": ex.rre(inst.b, x_true) if args.experiment == "deblur" else None,
        "results": solvers_json,
    })
    io.write_json(out_dir / "summary.json", summary)
    _print_table(summary_rows)
    return EXIT_OK if runs else EXIT_FAILURE


def _print_table(rows):
    print(f"{'solver':8s} {'tol':>7s} {'iters':>7s} {'time_s':>9s}")
    for r in rows:
        if r[5] == "failed":
            print(f"{r[0]:8s} {'failed':>7s}")
            continue
        it = "-" if r[2] == "" else str(r[2])
        t = "-" if r[3] == "" else f"{r[3]:.3f}"
        print(f"{r[0]:8s} {r[1]:7.0e} {it:>7s} {t:>9s}")


def cmd_verify(args):
    run_dir = args.out
    try:
        summary = io.read_json(run_dir / "summary.json")
        history = io.read_history_csv(run_dir / "history_sfbem.csv")
        trace = io.read_jsonl(run_dir / "trace_sfbem.jsonl")
        metric_records = io.read_jsonl(run_dir / "metric_report_sfbem.jsonl")
    except FileNotFoundError as err:
        raise UsageError(f"no completed sfbem run in {run_dir}: {err.filename} missing") from err
    if summary["experiment"] != args.experiment or summary["seed"] != args.seed:
        raise UsageError(f"{run_dir} holds {summary['experiment']} seed {summary['seed']}")
    report = verify_report(summary, history, trace, metric_records, instance=_instance(args))
    io.write_json(run_dir / "verify_report.json", report)
    for key in ("metric_conditions", "rate", "backtracking"):
        print(f"{key:18s} {'PASS' if report[key]['ok'] else 'FAIL'}")
    return EXIT_OK


def verify_report(summary, history, trace, metric_records, instance=None):
    """Metric conditions, rate constant and backtracking invariant of a
    recorded sfbem run, as a JSON-ready dict with a fixed set of keys."""
    s = summary["settings"]
    F = np.array([r["F"] for r in history])
    bad = [r["k"] for r in metric_records if not r["ok"]]
    metric = {
        "ok": not bad, "checked": len(metric_records), "violations": bad[:10],
        "max_ratio_over_bound": max((r["max_ratio"] / r["bound"] for r in metric_records
                                     if "max_ratio" in r), default=None),
        "tau_stable_from": summary["results"]["sfbem"].get("tau_stable_from"),
        "tau_stable_from_schedule": summary["results"]["sfbem"].get("tau_stable_from_schedule"),
    }
    rate = ex.rate_check(F, summary["F_star"], s["a"])
    lipschitz = None
    if instance is not None and instance.kind == "density":
        lipschitz = float(np.linalg.eigvalsh(instance.C)[-1])
    bt = ex.backtracking_check(trace, s["alpha0"], s["delta"],
                               BoundSchedule(s["b"], s["p"]).eta, lipschitz)
    return {"experiment": summary["experiment"], "seed": summary["seed"],
            "iterations": len(history), "F_star": summary["F_star"],
            "metric_conditions": metric, "rate": rate, "backtracking": bt,
            "ok": bool(metric["ok"] and rate["ok"] and bt["ok"])}


COMMANDS = {"generate": cmd_generate, "compare": cmd_compare, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"scaledfb: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.FormatError) as err:
        print(f"scaledfb: I/O error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, DomainError, RuntimeError) as err:
        print(f"scaledfb: numerical failure: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
