"""Command line interface.

Subcommands cover the pipeline at different depths: `check` gates the norm,
`paths` certifies the highway construction, `weights`/`simulate`/`profile`/
`shape`/`audit` run slices of a configured experiment, and `run` is the
whole pipeline with artifact emission.  Exit codes partition the failure
causes: 1 usage, 2 refusal, 3 certification or falsified audit, 4 resource,
5 internal invariant.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import __version__
from .config import ExperimentConfig
from .errors import (EXIT_CERTIFICATION, EXIT_OK, EXIT_USAGE, NilfppError,
                     RefusalError)
from .norms import check_conjugation_invariance
from .runner import execute, manifest_bytes, run
from .weights import derive_constants

OUTPUT_ENV = "NILFPP_OUTPUT_DIR"

STAGES = {
    "run": ("profiles", "audits", "svg", "weights"),
    "simulate": ("profiles",),
    "profile": ("profiles",),
    "shape": ("profiles", "svg"),
    "audit": ("audits",),
    "weights": ("weights",),
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("config", help="experiment config JSON file")
    p.add_argument("--seeds", type=int, default=None,
                   help="override the seed count")
    p.add_argument("--radius", type=int, default=None,
                   help="override the search radius")
    p.add_argument("--n-max", type=int, default=None,
                   help="override the level cutoff")
    p.add_argument("--output-dir", default=None,
                   help="override the output directory "
                        f"(also via ${OUTPUT_ENV})")
    p.add_argument("--chunk", type=int, default=None,
                   help="kernel batch size; affects speed only, never output")


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit 2 on usage errors; 2 means refusal here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="nilfpp",
        description="first-passage percolation laboratory on virtually "
                    "nilpotent Cayley graphs")
    ap.add_argument("--version", action="version",
                    version=f"nilfpp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "run": "full pipeline with artifact emission",
        "check": "conjugation-invariance gate only",
        "paths": "construct and certify the highway paths and constants",
        "weights": "emit weights.csv for the first seed",
        "simulate": "print passage estimates for the configured targets",
        "profile": "emit profiles.csv",
        "shape": "emit the rescaled ball cloud SVGs",
        "audit": "run the audits; nonzero exit when one fails",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
    return ap


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seeds is not None:
        cfg.n_seeds = args.seeds
    if args.radius is not None:
        cfg.search_radius = args.radius
    if args.n_max is not None:
        cfg.n_max = args.n_max
    env_dir = os.environ.get(OUTPUT_ENV)
    if env_dir:
        cfg.output_dir = env_dir
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    cfg.validate()
    return cfg


def _cmd_check(cfg: ExperimentConfig) -> int:
    model = cfg.model()
    spec = cfg.norm_spec(model.d)
    witness = check_conjugation_invariance(spec, model, seed=cfg.seed)
    if witness is None:
        print(f"accepted: {cfg.norm} is conjugation invariant for "
              f"{model.name}")
        return EXIT_OK
    print(f"refused: {cfg.norm} is not conjugation invariant for "
          f"{model.name}")
    print(f"witness: {json.dumps(witness, sort_keys=True)}")
    return RefusalError.exit_code


def _cmd_paths(cfg: ExperimentConfig) -> int:
    model = cfg.model()
    spec = cfg.norm_spec(model.d)
    mode = cfg.resolve_mode(model)
    bundle, configs = derive_constants(model, spec, cfg.seed, cfg.n_max,
                                       mode=mode)
    print(f"certified {len(configs)} levels in {mode} mode")
    for key in ("h", "K", "C0", "C0p", "Kp", "C", "Mp", "k_lower", "shell_c"):
        value = bundle.to_dict().get(key)
        if value is not None:
            print(f"  {key} = {value!r}")
    for n in sorted(configs):
        hc = configs[n]
        print(f"  level {n}: target {hc.z}, shell {hc.shell_size} edges")
    return EXIT_OK


def _cmd_simulate(cfg: ExperimentConfig, chunk: Optional[int]) -> int:
    result = execute(cfg, chunk=chunk, stages=STAGES["simulate"])
    print(f"region: {result.manifest.get('region')}")
    for p in result.profiles:
        for i, t in enumerate(p.times):
            flag = " stale" if p.stale[i] else ""
            print(f"direction {p.direction} t={t} target {p.targets[i]}: "
                  f"T~ = {float(p.value[i])!r} se {float(p.se[i])!r} "
                  f"ratio {float(p.ratio[i])!r}{flag}")
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "check":
            return _cmd_check(cfg)
        if args.command == "paths":
            return _cmd_paths(cfg)
        if args.command == "simulate":
            return _cmd_simulate(cfg, args.chunk)
        result = run(cfg, chunk=args.chunk, stages=STAGES[args.command])
        out = cfg.output_dir
        names = sorted(result.artifacts) + ["manifest.json"]
        print(f"wrote {', '.join(names)} to {out}")
        if args.command == "audit" or result.audits:
            for rep in result.audits:
                state = "passed" if rep.passed else "FAILED"
                print(f"audit {rep.name}: {state}")
                for c in rep.failures():
                    print(f"  {c.name}: value {c.value!r} tolerance "
                          f"{c.tolerance!r} witness {c.witness}")
        if args.command == "audit" and not result.audits_passed:
            return EXIT_CERTIFICATION
        return EXIT_OK
    except RefusalError as e:
        print(f"refused: {e}", file=sys.stderr)
        if e.witness is not None:
            print(f"witness: {json.dumps(e.witness, sort_keys=True)}",
                  file=sys.stderr)
        return e.exit_code
    except NilfppError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
