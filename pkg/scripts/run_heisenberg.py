#!/usr/bin/env python3
"""Heisenberg (X, Y generators) convergence against the Euclidean target.

The abelianized arena is Z^2 in the (a, c) coordinates; the central
coordinate is searched over implicitly by the lift minimization.  Full
scale uses search radius 48 (about 5e6 vertices); --quick stays tiny.
"""

import argparse
import json
import os
import sys

from nilfpp.cli import main as cli_main

D = 0.7071067811865476  # unit diagonal component

FULL = {
    "schema": 1,
    "group": "heisenberg:XY",
    "norm": {"type": "lp", "p": 2},
    "mode": "auto",
    "seed": 11,
    "n_max": 11,
    "target_radius": 46,
    "search_radius": 48,
    "directions": [[1, 0], [0, 1], [-1, 0], [0, -1],
                   [D, D], [-D, D], [D, -D], [-D, -D]],
    "schedule": [8, 16, 32],
    "n_seeds": 10,
    "vertex_budget": 6_000_000,
    "symmetry_targets": [],
}

QUICK = dict(FULL, n_max=8, target_radius=12, search_radius=14,
             schedule=[4, 8], n_seeds=3)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/heisenberg")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--chunk", type=int, default=None)
    args = ap.parse_args()
    cfg = dict(QUICK if args.quick else FULL, output_dir=args.out)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "config.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
    argv = ["run", path]
    if args.chunk is not None:
        argv += ["--chunk", str(args.chunk)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
