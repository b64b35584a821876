"""Print the metric bound schedule and where tau_k stops changing.

gamma_k = sqrt(1 + b/(k+1)^p) bounds the diagonal scaling; the relative
increment of tau_k = prod gamma_j^2 is gamma_k^2 - 1.

Usage: python3 scripts/metric_schedule.py [--b 1e10 1e6 1e13] [--p 2.1] [--rtol 1e-9]
"""

import argparse

from scaledfb.metric import BoundSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--b", type=float, nargs="+", default=[1e6, 1e10, 1e13])
    ap.add_argument("--p", type=float, default=2.1)
    ap.add_argument("--rtol", type=float, default=1e-9)
    args = ap.parse_args()
    for b in args.b:
        s = BoundSchedule(b, args.p)
        marks = ", ".join(f"gamma_{k}={s.gamma(k):.4g}" for k in (0, 10, 100, 1000, 10000))
        print(f"b={b:g}: {marks}; increment < {args.rtol:g} from k={s.first_stable_index(args.rtol)}")


if __name__ == "__main__":
    main()
