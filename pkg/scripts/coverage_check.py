"""Empirical coverage of the detection-rate interval across confidence levels.

    python3 scripts/coverage_check.py --q 0 0.5 0.9 0.99 --trials 500
"""

import argparse
import dataclasses

from stapshrink.harness import ExperimentConfig, coverage_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--q", type=float, nargs="+", default=[0.0, 0.5, 0.9, 0.99])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--amplitude", type=float, default=4.0)
    ap.add_argument("--estimators", nargs="+", default=["LWD", "Population"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    base = ExperimentConfig(
        p=args.p, n_values=(args.n,), estimators=tuple(args.estimators), trials=args.trials,
        amplitude=args.amplitude, seed=args.seed,
    )
    print("estimator,q,trials,coverage")
    for q in args.q:
        for row in coverage_experiment(dataclasses.replace(base, q=q), workers=args.workers):
            print(f"{row.estimator},{q},{row.trials},{row.coverage:.4f}")


if __name__ == "__main__":
    main()
