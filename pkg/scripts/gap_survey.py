#!/usr/bin/env python3
"""Ratio of the best adaptive value to each policy on a seeded random corpus.

Writes one CSV row per instance to stdout (or --out).
"""
import argparse
import csv
import sys

from sk_adapt.evalexact import eval_nonadaptive, eval_procedural, optimal_adaptive, optimal_nonadaptive
from sk_adapt.families import random_corpus
from sk_adapt.lpbound import phi
from sk_adapt.policies import non_adaptive_greedy, one_semi_adaptive_greedy, semi_adaptive_greedy


def survey(count, n_max, seed, variant):
    for idx, inst in enumerate(random_corpus(count, n_max, seed=seed, variant=variant)):
        adapt, _ = optimal_adaptive(inst)
        best_plan, _ = optimal_nonadaptive(inst)
        plan, _ = non_adaptive_greedy(inst)
        pol2, _ = one_semi_adaptive_greedy(inst)
        yield {
            "idx": idx,
            "n": inst.n,
            "phi1": phi(inst, 1.0).value,
            "adapt": adapt,
            "best_plan": best_plan,
            "greedy0": eval_nonadaptive(inst, plan).expected_value,
            "semi1": eval_procedural(inst, pol2).expected_value,
            "semik2": eval_procedural(inst, semi_adaptive_greedy(inst, 2)).expected_value,
        }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variant", choices=["risky", "nonrisky"], default="risky")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = None
    worst = {}
    for row in survey(args.count, args.n_max, args.seed, args.variant):
        if writer is None:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            writer.writeheader()
        writer.writerow({k: f"{v:.12g}" if isinstance(v, float) else v for k, v in row.items()})
        for key in ("best_plan", "greedy0", "semi1", "semik2"):
            if row[key] > 0:
                worst[key] = max(worst.get(key, 0.0), row["adapt"] / row[key])
    if fh is not sys.stdout:
        fh.close()
    for key, val in worst.items():
        print(f"worst adapt/{key}: {val:.6f}", file=sys.stderr)


if __name__ == "__main__":
    main()
