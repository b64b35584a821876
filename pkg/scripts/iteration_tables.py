"""Iterations-to-tolerance tables for the three test families.

Usage: python3 scripts/iteration_tables.py [--seeds 7 1 2 3] [--out results/tables.csv]
"""

import argparse
from pathlib import Path

from scaledfb import experiments as ex
from scaledfb import io
from scaledfb.solvers import run

FAMILIES = {
    "density": ({"n": 200}, ("sfbem", "fista", "sgp", "gp")),
    "deblur": ({"m": 64}, ("sfbem", "fista", "sgp", "gp")),
    "cs": ({"m": 100, "n": 500, "s": 5}, ("sfbem", "fista", "bb_fb")),
}


def table_rows(kind, seed, sizes, solvers, cache):
    inst = ex.generate(kind, seed, **sizes)
    x_star, F_ref = ex.compute_reference(inst, cache_dir=cache)
    x_true = getattr(inst, "x_true", None)
    runs, trackers = {}, {}
    for alg in solvers:
        trackers[alg] = ex.ErrorTracker(x_star, x_true)
        runs[alg] = run(ex.default_config(kind, alg), inst.problem(), inst.x0(),
                        observer=trackers[alg])
    F_star = min([F_ref] + [float(r.objective.min()) for r in runs.values()])
    rows = []
    for alg in solvers:
        rep = ex.evaluate(runs[alg], F_star, tracker=trackers[alg])
        for r in rep.table:
            rows.append([kind, seed, alg, r["tol"], r["it"] or "", r["rme"] or "",
                         r["time_s"] or ""])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 1, 2, 3])
    ap.add_argument("--families", nargs="+", default=list(FAMILIES), choices=list(FAMILIES))
    ap.add_argument("--out", type=Path, default=Path("results/tables.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for kind in args.families:
        sizes, solvers = FAMILIES[kind]
        for seed in args.seeds:
            part = table_rows(kind, seed, sizes, solvers, args.out.parent / "cache")
            for r in part:
                print(" ".join(str(v) for v in r[:5]))
            rows.extend(part)
    io.write_csv(args.out, ["experiment", "seed", "solver", "tol", "iterations", "rme", "time_s"],
                 rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
