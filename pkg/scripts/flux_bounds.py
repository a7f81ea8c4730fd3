"""K = 2 flux estimates on a density grid against the known bounds, as CSV."""

from __future__ import annotations

import argparse

import numpy as np

from kexclusion.experiments import flux_bounds_check
from kexclusion.macroflux import flux_bounds_k


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--T", type=float, default=2000.0)
    ap.add_argument("--replicas", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rhos = np.linspace(0.0, 1.0, args.points)
    rep = flux_bounds_check(2, rhos, args.n, args.T, args.replicas, args.seed)
    lo, hi = flux_bounds_k(rhos)
    print("rho,f2_hat,stderr,lower,upper")
    for r, a, b in zip(rhos, lo, hi):
        key = f"f2({r:g})"
        print(f"{r:g},{rep.estimates[key]:.6f},{rep.stderr[key]:.6f},{a:.6f},{b:.6f}")
    print("# passed:", rep.passed)


if __name__ == "__main__":
    main()
