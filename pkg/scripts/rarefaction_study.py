"""Second-class particle in a K = 1 rarefaction fan across scales n."""

from __future__ import annotations

import argparse

from kexclusion.experiments import rarefaction_fan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, default=0.8)
    ap.add_argument("--lam", type=float, default=0.2)
    ap.add_argument("--ns", type=int, nargs="+", default=[250, 500, 1000])
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("n,ks,outside_fraction,max_overshoot")
    for n in args.ns:
        rep = rarefaction_fan(args.rho, args.lam, n, 1.0, args.replicas, args.seed)
        out = rep.estimates["outside_count"] / args.replicas
        print(f"{n},{rep.estimates['ks']:.4f},{out:.4f},{rep.estimates['max_overshoot']:.4f}")


if __name__ == "__main__":
    main()
