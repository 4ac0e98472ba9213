"""End-to-end orchestration: configured runs and reproducible emission.

Pipeline order: invariance gate, path construction and certification,
constants finalization, weight field, simulation, profiles and audits,
emission.  Everything emitted except the wall-clock timing block is a
deterministic function of the config, so reruns overwrite byte-identically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .engine import (band_eligible, build_region, field_stream, simulate,
                     uniform_stream)
from .errors import NilfppError, ResourceError
from .norms import BoundarySequence, ConstantsBundle, require_conjugation_invariance
from .shape import (ball_cloud, center_growth_census, cloud_svg,
                    competition_census, directional_profiles, profile_targets,
                    symmetry_audit, symmetry_targets)
from .shape import membership_audit as _membership_audit
from .weights import derive_constants, truncation_error_bound

MEMBERSHIP_RADIUS = 24
MEMBERSHIP_WALKS = 1000
CENSUS_RADIUS = 18
CENSUS_LEVELS = 20
CENTER_RADII = (4, 24)

ALL_STAGES = ("profiles", "audits", "svg", "weights")


@dataclass
class RunResult:
    config: ExperimentConfig
    manifest: dict
    artifacts: dict = field(default_factory=dict)   # name -> bytes
    profiles: list = field(default_factory=list)
    audits: list = field(default_factory=list)

    @property
    def audits_passed(self) -> bool:
        return all(a.passed for a in self.audits)


def _pad_lanes(enc: tuple, width: int) -> tuple:
    return tuple(enc) + (0,) * (width - len(enc))


def _section_vertices(model, region):
    """(q, vertex) pairs for the coset section, or None if any is missing."""
    out = []
    width = region.coords.shape[1]
    for q in model.q_list():
        enc = np.array(_pad_lanes(model.encode_lanes(model.section(q)), width),
                       dtype=np.int64)
        hits = np.flatnonzero((region.coords == enc).all(axis=1))
        if hits.size == 0:
            return None
        out.append((q, int(hits[0])))
    return out


def _make_stream(config: ExperimentConfig, region, bundle, bseq, configs,
                 seeds, chunk: Optional[int], with_levels: bool):
    if config.oracle == "uniform":
        return uniform_stream(region, seeds)
    if config.oracle == "uniform-k":
        return uniform_stream(region, seeds, value=bundle.K)
    return field_stream(region, bundle, config.n_max, seeds, bseq=bseq,
                        configs=configs, chunk=chunk, with_levels=with_levels)


def _profiles_csv(profiles) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction", "t", "target", "value", "se", "ratio",
                "median_ratio", "stale"])
    for p in profiles:
        for i, t in enumerate(p.times):
            w.writerow([
                " ".join(repr(c) for c in p.direction), t,
                " ".join(str(c) for c in p.targets[i]),
                repr(float(p.value[i])), repr(float(p.se[i])),
                repr(float(p.ratio[i])), repr(float(p.median_ratio[i])),
                int(p.stale[i]),
            ])
    return buf.getvalue().encode()


def _weights_csv(region, stream) -> bytes:
    model = region.model
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["from", "to", "label", "weight", "winner_level"])
    for item in stream:
        wv, lv = item[1], item[2]
        for k in range(region.n_edges):
            w.writerow([
                " ".join(str(c) for c in region.vertex_tuple(int(region.edge_v[k]))),
                " ".join(str(c) for c in region.vertex_tuple(int(region.edge_to[k]))),
                model.gen_labels[int(region.edge_gen[k])],
                repr(float(wv[k])), int(lv[k]),
            ])
        break
    return buf.getvalue().encode()


def _profile_dicts(profiles) -> list:
    return [{
        "direction": list(p.direction),
        "times": list(p.times),
        "targets": [list(z) for z in p.targets],
        "median_ratio": [float(r) for r in p.median_ratio],
        "improved_scales": p.improved_scales(),
        "stale": [bool(s) for s in p.stale],
    } for p in profiles]


def execute(config: ExperimentConfig, chunk: Optional[int] = None,
            stages=ALL_STAGES) -> RunResult:
    """Run the pipeline; artifact bytes land in the result, nothing on disk.

    The chunk knob only re-batches kernel work and never enters the config
    hash; results are bit-identical across chunk sizes.
    """
    t0 = time.monotonic()
    config.validate()
    model = config.model()
    spec = config.norm_spec(model.d)
    mode = config.resolve_mode(model)

    require_conjugation_invariance(spec, model, seed=config.seed)

    band = band_eligible(model, mode) and config.oracle is None
    need_configs = config.oracle is None and not band
    bundle, configs = derive_constants(
        model, spec, config.seed, config.n_max, mode=mode,
        config_levels=None if need_configs else ())
    notes = []
    if mode == "general":
        note = config.check_radius_invariant(bundle.K, bundle.k_lower, mode)
        if note:
            notes.append(note)

    manifest = {
        "schema": 1,
        "tool": {"name": "nilfpp", "version": __version__},
        "config": config.to_json(include_output=False),
        "config_hash": config.config_hash(),
        "mode": mode,
        "oracle": config.oracle,
        "constants": bundle.to_dict(),
        "truncation_bound": truncation_error_bound(config.n_max,
                                                   bundle.shell_c),
        "notes": notes,
    }
    result = RunResult(config, manifest)
    if config.search_radius == 0:
        manifest["region"] = {"radius": 0, "vertices": 1, "edges": 0}
        manifest["artifacts"] = {}
        manifest["timings"] = {"wall_clock_s": time.monotonic() - t0}
        return result

    region = build_region(model, config.search_radius)
    if region.n_vertices > config.vertex_budget:
        raise ResourceError(
            f"region has {region.n_vertices} vertices, budget is "
            f"{config.vertex_budget}")
    manifest["region"] = {"radius": config.search_radius,
                          "vertices": int(region.n_vertices),
                          "edges": int(region.n_edges)}
    bseq = BoundarySequence(spec, config.seed)
    seeds = [config.seed + i for i in range(config.n_seeds)]
    directions = config.resolve_directions(spec)
    prof_targets = profile_targets(directions, config.schedule)
    sym_zs = [tuple(int(c) for c in z) for z in config.symmetry_targets]
    nontrivial_q = len(model.q_list()) > 1
    sym_all = symmetry_targets(model, sym_zs) if (nontrivial_q and sym_zs) else []
    all_targets = list(dict.fromkeys(prof_targets + sym_all))

    sections = _section_vertices(model, region) if nontrivial_q else None
    extra = (np.array([v for _, v in sections], dtype=np.int64)
             if sections else None)

    want_hist = config.oracle is None
    stream = _make_stream(config, region, bundle, bseq, configs, seeds, chunk,
                          with_levels=want_hist)
    sim = simulate(region, stream, all_targets, config.n_seeds,
                   extra_vertices=extra, want_cloud="svg" in stages,
                   want_level_hist=want_hist)
    est = sim.estimate
    manifest["stale_target_count"] = int(est.stale.sum())
    if sim.level_hist is not None:
        manifest["winner_level_histogram"] = sim.level_hist.tolist()

    if "profiles" in stages and directions:
        result.profiles = directional_profiles(est, spec, directions,
                                               config.schedule)
        result.artifacts["profiles.csv"] = _profiles_csv(result.profiles)
        manifest["profiles"] = _profile_dicts(result.profiles)

    if "audits" in stages:
        if config.oracle is None:
            r_aud = min(config.search_radius, MEMBERSHIP_RADIUS)
            mregion = (region if config.search_radius <= MEMBERSHIP_RADIUS
                       else build_region(model, r_aud))
            cut = max(r_aud - 2, 0)
            mtargets = [z for z in all_targets
                        if sum(abs(c) for c in z) <= cut]
            mstream = _make_stream(config, mregion, bundle, bseq, configs,
                                   seeds, chunk, with_levels=True)
            result.audits.append(_membership_audit(
                mregion, spec, bundle, mstream, config.n_seeds, bseq,
                targets=mtargets, n_walks=MEMBERSHIP_WALKS,
                audit_seed=config.seed))
        if nontrivial_q and sym_zs and sections:
            means = {q: float(sim.extra_samples[:, i].mean())
                     for i, (q, _) in enumerate(sections)}
            result.audits.append(symmetry_audit(
                model, est, max(means.values()), sym_zs,
                section_means=means))
        if model.tag == 200 and config.search_radius >= CENTER_RADII[0] + 2:
            hi = min(CENTER_RADII[1], config.search_radius)
            result.audits.append(center_growth_census(
                model, radii=range(CENTER_RADII[0], hi + 1)))
        if band and config.search_radius >= 16:
            result.audits.append(competition_census(
                model, bseq, bundle, min(config.search_radius, CENSUS_RADIUS),
                min(config.n_max, CENSUS_LEVELS), seeds))
        manifest["audits"] = [a.to_dict() for a in result.audits]
        manifest["audits_passed"] = result.audits_passed

    if "svg" in stages and sim.cloud is not None and model.d == 2:
        for t in sorted(set(config.schedule)):
            sc = ball_cloud(sim.cloud.points, sim.cloud.value, float(t),
                            sim.cloud.stale)
            result.artifacts[f"shape_t{t}.svg"] = cloud_svg(sc, spec).encode()

    if "weights" in stages and config.emit_weights:
        wstream = _make_stream(config, region, bundle, bseq, configs,
                               seeds[:1], chunk, with_levels=True)
        if config.oracle is not None:
            wstream = ((si, w, np.zeros(region.n_edges, np.uint8))
                       for si, w in wstream)
        result.artifacts["weights.csv"] = _weights_csv(region, wstream)

    manifest["artifacts"] = {
        name: hashlib.sha256(data).hexdigest()
        for name, data in sorted(result.artifacts.items())}
    manifest["timings"] = {"wall_clock_s": time.monotonic() - t0}
    return result


def manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode()


def emit(result: RunResult, out_dir: Optional[str] = None) -> list:
    """Write artifacts plus manifest.json; returns the written paths."""
    out = out_dir if out_dir is not None else result.config.output_dir
    os.makedirs(out, exist_ok=True)
    written = []
    for name, data in sorted(result.artifacts.items()):
        path = os.path.join(out, name)
        try:
            with open(path, "wb") as f:
                f.write(data)
        except OSError as e:
            raise NilfppError(f"cannot write artifact {path}: {e}")
        written.append(path)
    path = os.path.join(out, "manifest.json")
    with open(path, "wb") as f:
        f.write(manifest_bytes(result.manifest))
    written.append(path)
    return written


def run(config: ExperimentConfig, chunk: Optional[int] = None,
        stages=ALL_STAGES, out_dir: Optional[str] = None) -> RunResult:
    result = execute(config, chunk=chunk, stages=stages)
    emit(result, out_dir=out_dir)
    return result


def load_manifest(path: str) -> dict:
    """Read a manifest and re-check every constant's defining inequality."""
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    ConstantsBundle.from_dict(obj["constants"]).validate()
    return obj
