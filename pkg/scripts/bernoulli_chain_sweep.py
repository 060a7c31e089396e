#!/usr/bin/env python3
"""Threshold rule on identical Bernoulli items: MDP threshold, the step-count
estimate, the exact chain value and a simulation of the same rule."""
import argparse
import csv
import math
import sys

from sk_adapt.families import make_bernoulli_eps
from sk_adapt.gaps import bernoulli_chain_mdp
from sk_adapt.model import greedy_order
from sk_adapt.montecarlo import McConfig, simulate, simulate_always_insert
from sk_adapt.policies import CountThresholdPolicy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default="0.1,0.05,0.02,0.01")
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    writer = csv.writer(sys.stdout)
    writer.writerow(["eps", "threshold", "step_estimate", "chain_value", "mc_value", "mc_se",
                     "chain_overflow", "mc_overflow", "always_insert_value"])
    for eps in (float(x) for x in args.eps.split(",")):
        ex = bernoulli_chain_mdp(eps)
        n = math.ceil(6 / eps)
        inst = make_bernoulli_eps(eps, n)
        pol = CountThresholdPolicy(tuple(greedy_order(inst)), ex.threshold)
        mc = simulate(inst, pol, McConfig(args.samples, args.seed), args.workers)
        nr = make_bernoulli_eps(eps, math.ceil(30 / eps), "nonrisky")
        always = simulate_always_insert(nr, McConfig(args.samples, args.seed), args.workers)
        writer.writerow([eps, ex.threshold, f"{ex.value_estimate:.6f}", f"{ex.chain_value:.6f}",
                         f"{mc.mean:.6f}", f"{mc.std_error:.2e}", f"{ex.chain_overflow:.6f}",
                         f"{mc.overflow_freq:.6f}", f"{always.mean:.6f}"])


if __name__ == "__main__":
    main()
