"""Conditional versus empirical false-alarm rate per training draw.

    python3 scripts/pfa_check.py --p 200 --n 400 --draws 20
"""

import argparse
import math

import numpy as np

from stapshrink.harness import ExperimentConfig, false_alarm_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--draws", type=int, default=20)
    ap.add_argument("--test-draws", type=int, default=100_000)
    ap.add_argument("--tau", type=float, default=3.0)
    ap.add_argument("--estimators", nargs="+", default=["LWD", "FML", "LWLinear"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    config = ExperimentConfig(
        p=args.p, n_values=(args.n,), estimators=tuple(args.estimators), trials=args.draws,
        tau=args.tau, seed=args.seed, fa_test_draws=args.test_draws,
    )
    rows = false_alarm_experiment(config, workers=args.workers)
    print("estimator,draw,xi,pfa_conditional,pfa_empirical,z")
    for r in rows:
        z = (r.pfa_empirical - r.pfa_conditional) / r.stderr
        print(f"{r.estimator},{r.draw},{r.xi:.6f},{r.pfa_conditional:.6f},{r.pfa_empirical:.6f},{z:+.2f}")
    target = math.exp(-args.tau)
    for e in config.estimators:
        mean = np.mean([r.pfa_conditional for r in rows if r.estimator == e.label])
        print(f"# {e.label}: mean conditional pfa {mean:.5f} vs exp(-tau) {target:.5f}")


if __name__ == "__main__":
    main()
