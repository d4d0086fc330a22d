"""Compare the two LWD kernel normalizations on identity and spiked covariances.

"semicircle" divides the kernel sums by 2*pi*l_j^2*h^2 so b/n is a density;
"unnormalized" is the same expression with no pi and an extra linear term in b.

    python3 scripts/kernel_comparison.py --trials 20
"""

import argparse

import numpy as np

from stapshrink.datagen import derive_rng, sample_training
from stapshrink.harness import EstimatorSpec, ExperimentConfig, sweep
from stapshrink.shrinkage import lwd_shrink

SPECS = (
    EstimatorSpec("LWD", kernel="semicircle", name="semicircle"),
    EstimatorSpec("LWD", kernel="unnormalized", name="unnormalized"),
    EstimatorSpec("Oracle"),
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("# identity covariance, p=100, n=200: median over trials")
    print("kernel,max_abs_d_minus_1,mean_abs_d_minus_1")
    for kernel in ("semicircle", "unnormalized"):
        mx, mean = [], []
        for t in range(args.trials):
            X = sample_training(np.eye(100), 200, "gaussian", derive_rng(args.seed, "kc", t))
            d = lwd_shrink(X, kernel=kernel).shrunk_eigs
            mx.append(np.max(np.abs(d - 1)))
            mean.append(np.mean(np.abs(d - 1)))
        print(f"{kernel},{np.median(mx):.4f},{np.median(mean):.4f}")

    print("# spiked covariance, gamma=0.5: median eta and median |xi-1|")
    print("estimator,p,eta,abs_xi_minus_1")
    for p in (100, 200, 400):
        config = ExperimentConfig(p=p, n_values=(2 * p,), estimators=SPECS, trials=args.trials, seed=args.seed)
        t = sweep(config)
        for spec in SPECS:
            eta = t.percentile(spec.label, 2 * p, "eta", 50)
            dev = np.median(np.abs(t.values(spec.label, 2 * p, "xi") - 1))
            print(f"{spec.label},{p},{eta:.4f},{dev:.4f}")


if __name__ == "__main__":
    main()
