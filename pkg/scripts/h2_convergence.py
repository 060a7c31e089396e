#!/usr/bin/env python3
"""Closed-form gaps of the two-stage worst-case families as n grows."""
import argparse
import csv
import math
import sys

from sk_adapt.families import worst_case_h2_nonrisky, worst_case_h2_risky
from sk_adapt.gaps import h2_nonrisky_gap, h2_risky_gap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="2,5,10,50,100,500,1000,2000,10000")
    args = ap.parse_args()

    writer = csv.writer(sys.stdout)
    writer.writerow(["n", "risky_gap", "risky_limit_gap", "nonrisky_gap", "nonrisky_limit_gap"])
    for n in (int(x) for x in args.sizes.split(",")):
        r = h2_risky_gap(worst_case_h2_risky(n))
        nr = h2_nonrisky_gap(worst_case_h2_nonrisky(n))
        writer.writerow([n, f"{r:.12g}", f"{1 + math.log(2) - r:.3e}",
                         f"{nr:.12g}", f"{1 + math.exp(-1) - nr:.3e}"])


if __name__ == "__main__":
    main()
