"""Exact-identity verification suites for every capacity."""

from __future__ import annotations

import argparse
import sys

from kexclusion.lattice import INF
from kexclusion.verify import SUITES, VerifyConfig, run_verify


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--suites", nargs="+", default=list(SUITES), choices=SUITES)
    args = ap.parse_args()
    cfg = VerifyConfig(instances=args.instances, Ks=(1, 2, 3, INF), seed=args.seed)
    results = run_verify(cfg, args.suites)
    for r in results:
        print(r.line())
        for f in r.failures[:5]:
            print("   ", f)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
