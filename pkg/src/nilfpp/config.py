"""Experiment configuration: a versioned JSON schema with strict validation.

A config fully determines a run up to the output directory; the canonical
serialization (sorted keys, output directory excluded) is what gets hashed
into the manifest, so byte-identical artifacts follow from equal configs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import NilfppError
from .groups import GroupModel, parse_group
from .norms import BoundarySequence, NormSpec

SCHEMA_VERSION = 1
MODES = ("auto", "simple", "general")
ORACLES = (None, "uniform", "uniform-k")


def _require(cond: bool, message: str):
    if not cond:
        raise NilfppError(f"invalid config: {message}")


@dataclass
class ExperimentConfig:
    group: str
    norm: dict
    schedule: list
    directions: Union[list, int]
    mode: str = "auto"
    seed: int = 0
    n_max: int = 16
    target_radius: int = 0
    search_radius: int = 0
    n_seeds: int = 1
    vertex_budget: int = 6_000_000
    output_dir: str = "out"
    generators: Optional[list] = None
    oracle: Optional[str] = None
    allow_stale: bool = False
    emit_weights: bool = False
    symmetry_targets: list = field(default_factory=list)

    # -- construction --------------------------------------------------------

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        _require(isinstance(obj, dict), "top level must be an object")
        _require(obj.get("schema") == SCHEMA_VERSION,
                 f"schema must be {SCHEMA_VERSION}")
        known = {"schema", "group", "norm", "schedule", "directions", "mode",
                 "seed", "n_max", "target_radius", "search_radius", "n_seeds",
                 "vertex_budget", "output_dir", "generators", "oracle",
                 "allow_stale", "emit_weights", "symmetry_targets"}
        unknown = set(obj) - known
        _require(not unknown, f"unknown fields {sorted(unknown)}")
        kwargs = {k: obj[k] for k in known & set(obj) if k != "schema"}
        cfg = ExperimentConfig(**kwargs)
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                try:
                    obj = json.load(f)
                except json.JSONDecodeError as e:
                    raise NilfppError(f"config {path} is not valid JSON: {e}")
        except OSError as e:
            raise NilfppError(f"cannot read config {path}: {e.strerror}")
        return ExperimentConfig.from_json(obj)

    # -- serialization -------------------------------------------------------

    def to_json(self, include_output: bool = True) -> dict:
        obj = {
            "schema": SCHEMA_VERSION,
            "group": self.group,
            "norm": self.norm,
            "schedule": list(self.schedule),
            "directions": self.directions,
            "mode": self.mode,
            "seed": self.seed,
            "n_max": self.n_max,
            "target_radius": self.target_radius,
            "search_radius": self.search_radius,
            "n_seeds": self.n_seeds,
            "vertex_budget": self.vertex_budget,
            "oracle": self.oracle,
            "allow_stale": self.allow_stale,
            "emit_weights": self.emit_weights,
            "symmetry_targets": [list(z) for z in self.symmetry_targets],
        }
        if self.generators is not None:
            obj["generators"] = [list(g) for g in self.generators]
        if include_output:
            obj["output_dir"] = self.output_dir
        return obj

    def canonical_json(self) -> str:
        return json.dumps(self.to_json(include_output=False), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- derived objects -----------------------------------------------------

    def model(self) -> GroupModel:
        gens = None
        if self.generators is not None:
            gens = tuple(tuple(int(c) for c in g) for g in self.generators)
        try:
            return parse_group(self.group, generators=gens)
        except ValueError as e:
            raise NilfppError(f"invalid config: {e}")

    def norm_spec(self, d: int) -> NormSpec:
        try:
            return NormSpec.from_json(self.norm, d)
        except (ValueError, KeyError, TypeError) as e:
            raise NilfppError(f"invalid config: bad norm spec ({e})")

    def resolve_mode(self, model: GroupModel) -> str:
        return model.default_mode if self.mode == "auto" else self.mode

    def resolve_directions(self, spec: NormSpec) -> list:
        """Direction list as given, or a deterministic fan of the given count."""
        if isinstance(self.directions, int):
            count = self.directions
            if spec.d == 2:
                return [(math.cos(2 * math.pi * k / count),
                         math.sin(2 * math.pi * k / count))
                        for k in range(count)]
            bseq = BoundarySequence(spec, self.seed)
            return [tuple(bseq.direction(k + 1)) for k in range(count)]
        return [tuple(v) for v in self.directions]

    # -- validation ----------------------------------------------------------

    def validate(self):
        _require(isinstance(self.group, str) and self.group, "group name")
        _require(isinstance(self.norm, dict), "norm must be an object")
        _require(self.mode in MODES, f"mode must be one of {MODES}")
        _require(self.oracle in ORACLES, f"oracle must be one of {ORACLES}")
        for name in ("seed", "n_max", "target_radius", "search_radius",
                     "n_seeds", "vertex_budget"):
            v = getattr(self, name)
            _require(isinstance(v, int) and not isinstance(v, bool),
                     f"{name} must be an integer")
        _require(self.seed >= 0, "seed must be >= 0")
        _require(self.n_max >= 1, "n_max must be >= 1")
        _require(self.n_seeds >= 1, "n_seeds must be >= 1")
        _require(self.vertex_budget >= 1, "vertex_budget must be >= 1")
        _require(self.target_radius >= 0, "target_radius must be >= 0")
        _require(self.search_radius >= self.target_radius,
                 "search_radius must cover target_radius")
        _require(isinstance(self.schedule, list) and self.schedule,
                 "schedule must be a nonempty list")
        for t in self.schedule:
            _require(isinstance(t, int) and t > 0,
                     "schedule entries must be positive integers")
        if isinstance(self.directions, int):
            _require(self.directions > 0, "direction count must be positive")
        else:
            _require(isinstance(self.directions, list),
                     "directions must be a list or a count")
            for v in self.directions:
                _require(isinstance(v, list) and any(c != 0 for c in v),
                         "directions must be nonzero vectors")
        for z in self.symmetry_targets:
            _require(isinstance(z, (list, tuple))
                     and all(isinstance(c, int) for c in z),
                     "symmetry targets must be integer vectors")
        _require(isinstance(self.allow_stale, bool), "allow_stale is a flag")
        _require(isinstance(self.emit_weights, bool), "emit_weights is a flag")
        model = self.model()
        spec = self.norm_spec(model.d)
        for v in self.resolve_directions(spec):
            _require(len(v) == model.d, "direction dimension mismatch")
        for z in self.symmetry_targets:
            _require(len(z) == model.d, "symmetry target dimension mismatch")
            _require(sum(abs(c) for c in z) <= self.target_radius,
                     f"symmetry target {z} outside target radius")
        if self.schedule and self.search_radius > 0:
            tmax = max(self.schedule)
            for v in self.resolve_directions(spec):
                reach = sum(int(math.ceil(abs(tmax * c) - 0.5)) for c in v)
                _require(reach <= self.target_radius,
                         f"schedule target for direction {v} exceeds target radius")

    def check_radius_invariant(self, K: float, k_lower: float,
                               mode: str) -> Optional[str]:
        """General-mode guarantee that no target estimate can be stale.

        Returns a note instead of raising when allow_stale is set; the
        required radius K/k * target is often far above desk scale, so the
        escape hatch trades certified exactness for flagged estimates.
        """
        if mode != "general" or self.search_radius == 0:
            return None
        need = (K / k_lower) * self.target_radius
        if self.search_radius >= need:
            return None
        msg = (f"search radius {self.search_radius} < (K/k) * target radius "
               f"= {need:.1f}; estimates may be stale")
        if self.allow_stale:
            return msg
        raise NilfppError(f"invalid config: {msg} (set allow_stale to accept)")
