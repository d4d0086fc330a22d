"""10/50/90 percentile bands of xi for LWD as n grows at fixed aspect ratio.

xi -> 1 means the conditional false-alarm rate exp(-tau/xi) approaches the
CFAR value exp(-tau).

    python3 scripts/xi_bands.py --gamma 0.5 --p 50 100 200 400
"""

import argparse

import numpy as np

from stapshrink.harness import ExperimentConfig, sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--estimators", nargs="+", default=["LWD", "FML", "Oracle"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    print("estimator,p,n,xi_p10,xi_p50,xi_p90,median_abs_xi_minus_1")
    for p in args.p:
        n = int(round(p / args.gamma))
        config = ExperimentConfig(
            p=p, n_values=(n,), estimators=tuple(args.estimators), trials=args.trials, seed=args.seed
        )
        table = sweep(config, workers=args.workers)
        for e in config.estimators:
            band = [table.percentile(e.label, n, "xi", q) for q in (10, 50, 90)]
            dev = float(np.median(np.abs(table.values(e.label, n, "xi") - 1)))
            print(f"{e.label},{p},{n}," + ",".join(f"{v:.6f}" for v in band) + f",{dev:.6f}")


if __name__ == "__main__":
    main()
