#!/usr/bin/env python3
"""Semidirect Z/4 x Z[i] runs: the conjugation gate and the symmetry audit.

First demonstrates the refusal of an axis-unequal box norm (the quotient
rotates the plane by 90 degrees, so the target must have that symmetry),
then runs the max-norm experiment whose estimates are compared against
their quarter-turn images.
"""

import argparse
import json
import os
import sys

from nilfpp.cli import main as cli_main

ACCEPTED = {
    "schema": 1,
    "group": "semidirect-zi",
    "norm": {"type": "lp", "p": "inf"},
    "mode": "auto",
    "seed": 3,
    "n_max": 10,
    "target_radius": 16,
    "search_radius": 32,
    "directions": [[1, 0], [1, 1]],
    "schedule": [4, 8],
    "n_seeds": 8,
    "vertex_budget": 6_000_000,
    "allow_stale": True,
    "symmetry_targets": [[8, 0], [6, 3]],
}

REFUSED_NORM = {"type": "polytope",
                "normals": [[0.5, 0.0], [-0.5, 0.0], [0.0, 1.0], [0.0, -1.0]]}

QUICK = dict(ACCEPTED, n_max=6, target_radius=16, search_radius=16,
             n_seeds=3, symmetry_targets=[[4, 0], [3, 2]])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/semidirect")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--chunk", type=int, default=None)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    refused = dict(ACCEPTED, norm=REFUSED_NORM, output_dir=args.out)
    rpath = os.path.join(args.out, "config_refused.json")
    with open(rpath, "w", encoding="utf-8") as f:
        json.dump(refused, f, indent=2, sort_keys=True)
    rc = cli_main(["check", rpath])
    print(f"axis-unequal box norm: exit code {rc} (2 = refused, as required)")

    cfg = dict(QUICK if args.quick else ACCEPTED, output_dir=args.out)
    path = os.path.join(args.out, "config.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
    argv = ["run", path]
    if args.chunk is not None:
        argv += ["--chunk", str(args.chunk)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
