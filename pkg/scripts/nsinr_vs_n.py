"""Median NSINR with 10-90 percentile bands against the training-sample count.

Desk-scale stand-in for the comparison figures: p=120, five spikes, Laplace
training data, every estimator on the same draws.

    python3 scripts/nsinr_vs_n.py --trials 100 --out nsinr.csv
"""

import argparse
import sys

from stapshrink.cli import format_sweep
from stapshrink.harness import ExperimentConfig, sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=120)
    ap.add_argument("--n", type=int, nargs="+", default=list(range(40, 501, 40)))
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--distribution", choices=["gaussian", "laplace"], default="laplace")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    n_values = [n for n in args.n if n != args.p]
    config = ExperimentConfig(
        p=args.p,
        n_values=n_values,
        estimators=("Oracle", "LWD", "FML", "AndersonR", "LWLinear"),
        trials=args.trials,
        distribution=args.distribution,
        seed=args.seed,
    )
    table = sweep(config, workers=args.workers)
    text = format_sweep(table, config)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        open(args.out, "w").write(text)

    print(f"{'n':>5} " + " ".join(f"{e.label:>10}" for e in config.estimators), file=sys.stderr)
    for n in n_values:
        meds = [table.percentile(e.label, n, "eta", 50) for e in config.estimators]
        print(f"{n:>5} " + " ".join(f"{m:>10.4f}" for m in meds), file=sys.stderr)


if __name__ == "__main__":
    main()
