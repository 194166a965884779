#!/usr/bin/env python3
"""Measure how the mean interference exposure concentrates as the population
grows under dense Gaussian weights.

Across independent replications of (weights, assignments, baselines), the
standard deviation of the population-mean exposure should fall like one over
the square root of the population size. Prints the table and the fitted
log-log slope.
"""

import argparse

import numpy as np

from spillsim.dynamics import DynamicsSpec, LinearPeer, LinearUnit, WeightedSumExposure, compute_exposure
from spillsim.rng import substream
from spillsim.weights import GaussianWeightParams, gen_dense_gaussian


def mean_exposure_std(n: int, reps: int, seed: int) -> float:
    spec = DynamicsSpec(unit=LinearUnit(), peer=LinearPeer(w_coef=1.0, y_coef=0.5), exposure=WeightedSumExposure())
    vals = []
    for rep in range(reps):
        weights = gen_dense_gaussian(n, GaussianWeightParams(1.0, 1.0), 1, seed=seed + rep)
        rng = substream(seed + rep, "probe")
        w_t = (rng.random(n) < 0.5).astype(float)
        y_prev = rng.standard_normal(n)
        e = compute_exposure(weights, spec, w_t, y_prev, np.zeros((n, 1)), 1)
        vals.append(e.mean())
    return float(np.std(vals))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="500,2000,8000")
    parser.add_argument("--reps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=9000)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    stds = {n: mean_exposure_std(n, args.reps, args.seed) for n in sizes}
    print(f"{'N':>8} {'std of mean exposure':>22}")
    for n in sizes:
        print(f"{n:>8} {stds[n]:>22.6f}")
    slope = np.polyfit(np.log(sizes), np.log([stds[n] for n in sizes]), 1)[0]
    print(f"log-log slope: {slope:.3f} (expect about -0.5)")


if __name__ == "__main__":
    main()
