#!/usr/bin/env python3
"""Grid certification of the two min-max constants at several resolutions."""
import argparse
import time

from sk_adapt.gaps import certify_T, certify_Tprime


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-grids", default="100,200,400")
    ap.add_argument("--tprime-grids", default="20,40,100")
    args = ap.parse_args()

    print("target,grid,min_found,grid_min,seconds,argmin")
    for g in (int(x) for x in args.t_grids.split(",")):
        start = time.perf_counter()
        res = certify_T(g)
        print(f"T,{g},{res.min_found:.10f},{res.grid_min:.10f},{time.perf_counter() - start:.2f},"
              f"\"{res.argmin}\"")
    for fixed in (False, True):
        for g in (int(x) for x in args.tprime_grids.split(",")):
            start = time.perf_counter()
            res = certify_Tprime(g, fixed_t=fixed)
            tag = "Tprime_fixed_t" if fixed else "Tprime"
            print(f"{tag},{g},{res.min_found:.10f},{res.grid_min:.10f},"
                  f"{time.perf_counter() - start:.2f},\"{res.argmin}\"")


if __name__ == "__main__":
    main()
