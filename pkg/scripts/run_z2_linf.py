#!/usr/bin/env python3
"""Z^2 shape-convergence experiment against the max-norm target.

Full scale matches the calibrated acceptance run (t up to 128, search
radius 224, 10 seeds); --quick shrinks everything for a desk test.
"""

import argparse
import json
import os
import sys

from nilfpp.cli import main as cli_main

D = 0.7071067811865476  # unit diagonal component

FULL = {
    "schema": 1,
    "group": "zd:2",
    "norm": {"type": "lp", "p": "inf"},
    "mode": "auto",
    "seed": 7,
    "n_max": 24,
    "target_radius": 182,
    "search_radius": 224,
    "directions": [[1, 0], [0, 1], [-1, 0], [0, -1],
                   [D, D], [-D, D], [D, -D], [-D, -D]],
    "schedule": [32, 64, 128],
    "n_seeds": 10,
    "vertex_budget": 6_000_000,
    "symmetry_targets": [],
}

QUICK = dict(FULL, n_max=14, target_radius=46, search_radius=64,
             schedule=[8, 16, 32], n_seeds=4)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/z2_linf")
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
