"""Limit-shape evidence extracted from passage-time data.

Directional profiles compare estimated passage against the target norm,
ball clouds rescale the estimated sub-level sets, and the audits run the
executable consequences of the construction: path membership with its
slack constant, conjugation symmetry of the induced norm, quadratic center
growth, and the claim-competition budget.  Every failed check carries a
witness; audits never raise on a falsified property, they report it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import hashing, sweep as sweeplib, weights as weightslib
from .engine import (PassageEstimate, Region, TargetIndex, build_region,
                     distances_from_identity)
from .errors import IntegrityError
from .groups import EdgePath, GroupModel, displacement
from .norms import (MEMBERSHIP_TOL, BoundarySequence, ConstantsBundle,
                    NormSpec)


def _round_half_toward_zero(v: np.ndarray) -> tuple:
    return tuple(int(math.copysign(math.ceil(abs(c) - 0.5), c)) for c in v)


# ---------------------------------------------------------------------------
# Directional profiles


@dataclass
class DirectionalProfile:
    """Convergence diagnostics for one direction vector.

    The scale-t target is round(t*v) with halves toward zero, and the ratio
    compares the estimate against t*Phi(v); v is used as given, so a non-unit
    direction probes the same ray on a rescaled schedule.
    """

    direction: tuple
    unit: np.ndarray
    phi_unit: float
    times: tuple
    targets: list
    value: np.ndarray            # (T,) mean-then-min estimates
    ratio: np.ndarray            # value / (t * phi_unit)
    se: np.ndarray               # standard error of the ratio
    seed_ratios: np.ndarray      # (S, T) per-seed ratios
    median_ratio: np.ndarray     # (T,) per-scale median over seeds
    stale: np.ndarray            # (T,) bool

    def deviation(self) -> np.ndarray:
        return np.abs(self.median_ratio - 1.0)

    def improved_scales(self) -> int:
        """Count of consecutive scale steps where |r_t - 1| decreased."""
        dev = self.deviation()
        return int(np.sum(dev[1:] < dev[:-1]))

    def non_increasing(self, tol: float = 0.0) -> bool:
        dev = self.deviation()
        return bool(np.all(dev[1:] <= dev[:-1] + tol))


def profile_target(direction, t: float) -> tuple:
    v = np.asarray(direction, dtype=float)
    if not np.linalg.norm(v):
        raise ValueError("profile direction must be nonzero")
    return _round_half_toward_zero(t * v)


def profile_targets(directions, times) -> list:
    """Direction-major target list matching directional_profiles order."""
    return [profile_target(v, t) for v in directions for t in times]


def directional_profiles(estimate: PassageEstimate, spec: NormSpec,
                         directions, times) -> list:
    """Slice a passage estimate into per-direction profiles.

    The estimate must cover profile_targets(directions, times); extra
    targets are ignored.
    """
    pos = {z: i for i, z in enumerate(estimate.targets)}
    times = tuple(int(t) for t in times)
    out = []
    for v in directions:
        u = np.asarray(v, dtype=float)
        phi_u = float(spec.phi(u))
        targets = [profile_target(v, t) for t in times]
        try:
            idx = np.array([pos[z] for z in targets], dtype=np.int64)
        except KeyError as e:
            raise IntegrityError(f"estimate lacks profile target {e}") from None
        denom = np.array(times, dtype=float) * phi_u
        value = estimate.value[idx]
        seed_ratios = estimate.samples[:, idx] / denom
        out.append(DirectionalProfile(
            direction=tuple(v), unit=u, phi_unit=phi_u, times=times,
            targets=targets, value=value, ratio=value / denom,
            se=estimate.se[idx] / denom, seed_ratios=seed_ratios,
            median_ratio=np.median(seed_ratios, axis=0),
            stale=estimate.stale[idx].copy()))
    return out


# ---------------------------------------------------------------------------
# Rescaled ball clouds


@dataclass
class ShapeCloud:
    """Rescaled sub-level set {z/t : passage estimate at z <= t}.

    padding is the circumradius of the rescaled fundamental cube
    [-1/2, 1/2]^d / t that thickens each point into a covering region.
    """

    t: float
    points: np.ndarray
    padding: float
    stale_any: bool


def ball_cloud(points: np.ndarray, value: np.ndarray, t: float,
               stale: Optional[np.ndarray] = None) -> ShapeCloud:
    if t <= 0:
        raise ValueError("cloud scale must be positive")
    points = np.asarray(points, dtype=float)
    sel = np.asarray(value) <= t
    pad = math.sqrt(points.shape[1]) / (2.0 * t)
    stale_any = bool(stale[sel].any()) if stale is not None else False
    return ShapeCloud(float(t), points[sel] / t, pad, stale_any)


def cloud_svg(cloud: ShapeCloud, spec: NormSpec, samples: int = 256,
              extent: float = 1.6, size: int = 640) -> str:
    """Self-contained SVG: cloud squares under the target-norm boundary."""
    if cloud.points.shape[1] != 2:
        raise ValueError("SVG emission needs a planar cloud")
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="{-extent:.3f} {-extent:.3f} '
        f'{2 * extent:.3f} {2 * extent:.3f}">',
        f'<rect x="{-extent:.3f}" y="{-extent:.3f}" width="{2 * extent:.3f}"'
        f' height="{2 * extent:.3f}" fill="#ffffff"/>',
    ]
    side = 1.0 / cloud.t
    half = side / 2.0
    for x, y in cloud.points:
        lines.append(f'<rect x="{x - half:.6f}" y="{-y - half:.6f}" '
                     f'width="{side:.6f}" height="{side:.6f}" '
                     f'fill="#1f77b4" fill-opacity="0.65"/>')
    pts = []
    for i in range(samples):
        a = 2.0 * math.pi * i / samples
        u = np.array([math.cos(a), math.sin(a)])
        r = 1.0 / float(spec.phi(u))
        pts.append(f"{r * u[0]:.6f},{-r * u[1]:.6f}")
    lines.append(f'<polygon points="{" ".join(pts)}" fill="none" '
                 f'stroke="#d62728" stroke-width="0.012"/>')
    lines.append(f'<!-- t={cloud.t!r} points={cloud.points.shape[0]} '
                 f'padding={cloud.padding!r} stale={cloud.stale_any} -->')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def heisenberg_scale(x, t: float) -> tuple:
    """Grading-weighted rescaling (a/t, c/t, b/t^2) of a Heisenberg element."""
    if t <= 0:
        raise ValueError("scale must be positive")
    a, b, c = x
    return (a / t, c / t, b / (t * t))


# ---------------------------------------------------------------------------
# Audit plumbing


@dataclass
class AuditCheck:
    name: str
    passed: bool
    value: float
    tolerance: object
    witness: Optional[dict] = None

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise IntegrityError(f"failed check {self.name!r} lacks a witness")

    def to_dict(self) -> dict:
        d = {"name": self.name, "passed": bool(self.passed),
             "value": self.value, "tolerance": self.tolerance}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


@dataclass
class AuditReport:
    name: str
    checks: list
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "notes": self.notes}


# ---------------------------------------------------------------------------
# Membership audit


def _edge_lookup(region: Region) -> np.ndarray:
    g = len(region.model.generators)
    lut = np.full((region.n_vertices, g), -1, np.int64)
    lut[region.edge_v, region.edge_gen] = np.arange(region.n_edges)
    return lut


def _step_edge(lut: np.ndarray, u: int, v: int, gi: int, sign: int) -> int:
    e = lut[u, gi] if sign > 0 else lut[v, gi]
    if e < 0:
        raise IntegrityError("path step leaves the region edge set")
    return int(e)


def _geodesic_steps(region: Region, pred: np.ndarray, target: int) -> list:
    """(u, v, gen, sign) steps of the predecessor chain 0 -> target."""
    chain = [int(target)]
    while chain[-1] != 0:
        p = int(pred[chain[-1]])
        if p < 0:
            raise IntegrityError("geodesic predecessor chain is broken")
        chain.append(p)
    chain.reverse()
    g = len(region.model.generators)
    steps = []
    for u, v in zip(chain, chain[1:]):
        row = region.adj[u]
        for col in range(2 * g):
            if row[col] == v:
                gi, sign = (col, 1) if col < g else (col - g, -1)
                steps.append((u, v, gi, sign))
                break
        else:
            raise IntegrityError("geodesic step is not an adjacency")
    return steps


def _random_walk(region: Region, audit_seed: int, si: int, j: int,
                 length: int) -> list:
    model = region.model
    g = len(model.generators)
    u, steps = 0, []
    for t in range(length):
        v = -1
        for attempt in range(32):
            h = hashing.site_u64(audit_seed, hashing.STREAM_WALK, model.tag,
                                 (si, j, t, attempt))
            col = int(h % (2 * g))
            v = int(region.adj[u, col])
            if v >= 0:
                break
        if v < 0:
            break
        gi, sign = (col, 1) if col < g else (col - g, -1)
        steps.append((u, v, gi, sign))
        u = v
    return steps


def _path_membership(region: Region, spec: NormSpec, slack: float,
                     w: np.ndarray, lut: np.ndarray, steps: list) -> tuple:
    """(phi ratio, total weight, displacement) of one sampled path."""
    model = region.model
    total = 0.0
    for (u, v, gi, sign) in steps:
        total += float(w[_step_edge(lut, u, v, gi, sign)])
    ep = EdgePath(model, region.vertex_tuple(steps[0][0]) if steps
                  else model.identity,
                  tuple((gi, sign) for (_, _, gi, sign) in steps))
    D = np.asarray(displacement(ep), dtype=float)
    return float(spec.phi(D)) / (total + slack), total, D


def _fast_runs(steps: list, w: np.ndarray, lv: np.ndarray, lut: np.ndarray,
               K: float) -> list:
    """Maximal runs of consecutive fast steps sharing a winner level."""
    runs, cur, cur_level = [], [], -1
    for st in steps:
        e = _step_edge(lut, *st[:2], *st[2:])
        fast = w[e] < K and lv[e] > 0
        if fast and lv[e] == cur_level:
            cur.append((st, e))
        else:
            if cur:
                runs.append((cur_level, cur))
            cur, cur_level = ([(st, e)], int(lv[e])) if fast else ([], -1)
    if cur:
        runs.append((cur_level, cur))
    return runs


def membership_audit(region: Region, spec: NormSpec, bundle: ConstantsBundle,
                     stream, n_seeds: int, bseq: Optional[BoundarySequence],
                     targets: Sequence = (), n_walks: int = 1000,
                     max_walk_len: Optional[int] = None,
                     audit_seed: int = 0) -> AuditReport:
    """Check Phi(D(gamma)) <= T(gamma) + slack on sampled paths.

    Samples hash-driven random walks from the identity plus one extracted
    geodesic per (target, seed), all evaluated against the same resolved
    weights the stream yields (which must include winner levels).  Also
    reports the parallel/perpendicular displacement split of maximal fast
    runs against their level direction.
    """
    model = region.model
    slack = bundle.slack()
    lut = _edge_lookup(region)
    tindex = TargetIndex(region)
    lifts = [tindex.lifts(z) for z in targets]
    per_seed = -(-n_walks // n_seeds) if n_seeds else 0
    if max_walk_len is None:
        max_walk_len = 2 * region.R
    max_ratio, worst = -math.inf, None
    violation = None
    n_paths = n_geo = 0
    run_count = 0
    d_par = d_perp = 0.0
    max_fast_ratio = 0.0
    seen = 0
    for item in stream:
        si, w = item[0], item[1]
        if len(item) < 3:
            raise IntegrityError("membership audit needs winner levels")
        lv = item[2]
        seen += 1
        paths = []
        if lifts:
            dist, pred = distances_from_identity(region, w, predecessors=True)
            for ls in lifts:
                if ls.size == 0:
                    continue
                best = int(ls[np.argmin(dist[ls])])
                paths.append(_geodesic_steps(region, pred, best))
                n_geo += 1
        for j in range(per_seed):
            h = hashing.site_u64(audit_seed, hashing.STREAM_SAMPLE, model.tag,
                                 (si, j))
            length = 1 + int(h % max_walk_len)
            steps = _random_walk(region, audit_seed, si, j, length)
            if steps:
                paths.append(steps)
        for steps in paths:
            n_paths += 1
            ratio, total, D = _path_membership(region, spec, slack, w, lut,
                                               steps)
            if ratio > max_ratio:
                max_ratio, worst = ratio, {
                    "seed_index": int(si), "length": len(steps),
                    "T": total, "D": [float(c) for c in D]}
            if ratio > 1.0 + MEMBERSHIP_TOL and violation is None:
                violation = dict(worst, ratio=ratio)
            if bseq is None:
                continue
            for level, run in _fast_runs(steps, w, lv, lut, bundle.K):
                run_count += 1
                sub = [st for st, _ in run]
                t_run = float(sum(w[e] for _, e in run))
                _, _, Dr = _path_membership(region, spec, slack, w, lut, sub)
                b = bseq.boundary_point(level)
                bhat = b / np.linalg.norm(b)
                par = float(Dr @ bhat)
                perp = Dr - par * bhat
                d_par += abs(par)
                d_perp += float(np.linalg.norm(perp))
                if t_run > 0:
                    dpar_phi = float(spec.phi(par * bhat)) / t_run
                    max_fast_ratio = max(max_fast_ratio, dpar_phi)
    if seen != n_seeds:
        raise IntegrityError("weight stream did not cover every seed")
    checks = [AuditCheck(
        name="path-membership", passed=max_ratio <= 1.0 + MEMBERSHIP_TOL,
        value=max_ratio, tolerance=1.0 + MEMBERSHIP_TOL, witness=violation)]
    return AuditReport("membership", checks, notes={
        "mode": bundle.mode, "slack": slack, "paths": n_paths,
        "geodesics": n_geo, "fast_runs": run_count,
        "d_parallel_total": d_par, "d_perp_total": d_perp,
        "max_fast_parallel_ratio": max_fast_ratio})


# ---------------------------------------------------------------------------
# Conjugation-symmetry audit


def symmetry_targets(model: GroupModel, zs) -> list:
    """Unique list of the targets and all their phi(q) images, in order."""
    out, seen = [], set()
    for z in zs:
        for q in model.q_list():
            img = tuple(model.phi_apply(q, tuple(int(c) for c in z)))
            if img not in seen:
                seen.add(img)
                out.append(img)
    return out


def symmetry_audit(model: GroupModel, estimate: PassageEstimate,
                   c_hat: float, zs,
                   section_means: Optional[dict] = None) -> AuditReport:
    """|est(z) - est(z^phi(q))| <= 2*c_hat + 4*SE for each target and q.

    c_hat is the largest estimated passage to a coset-section vertex; the
    statistical slack combines the standard errors of the two estimates in
    quadrature.  Stale flags are reported, not asserted: region truncation
    acts on both sides of each comparison.
    """
    notes = {"c_hat": c_hat}
    if section_means is not None:
        notes["section_means"] = {str(q): v for q, v in section_means.items()}
    qs = [q for q in model.q_list() if q != model.q_of(model.identity)]
    if not qs:
        return AuditReport("symmetry", [AuditCheck(
            "vacuous-trivial-quotient", True, 0.0, 0.0)], notes=notes)
    pos = {z: i for i, z in enumerate(estimate.targets)}
    checks = []
    stale_targets = []
    for z in zs:
        z = tuple(int(c) for c in z)
        for q in qs:
            img = tuple(model.phi_apply(q, z))
            i, j = pos[z], pos[img]
            diff = abs(float(estimate.value[i]) - float(estimate.value[j]))
            se = math.hypot(float(estimate.se[i]), float(estimate.se[j]))
            bound = 2.0 * c_hat + 4.0 * se
            passed = diff <= bound
            checks.append(AuditCheck(
                name=f"z={z} q={q}", passed=passed, value=diff,
                tolerance=bound,
                witness=None if passed else {
                    "z": list(z), "image": list(img),
                    "est_z": float(estimate.value[i]),
                    "est_image": float(estimate.value[j]), "se": se}))
            for t, k in ((z, i), (img, j)):
                if estimate.stale[k] and t not in stale_targets:
                    stale_targets.append(t)
    notes["stale_targets"] = [list(t) for t in stale_targets]
    return AuditReport("symmetry", checks, notes=notes)


# ---------------------------------------------------------------------------
# Center-growth census


def center_growth_census(model: GroupModel,
                         radii: Sequence[int] = tuple(range(4, 25)),
                         slope_range: tuple = (1.7, 2.6)) -> AuditReport:
    """Count central elements (a = c = 0) per ball; check quadratic growth."""
    if model.tag != 200:
        raise ValueError("center census targets the Heisenberg model")
    radii = sorted(int(r) for r in radii)
    coords, dist, _ = sweeplib.build_ball(model, radii[-1])
    central = (coords[:, 0] == 0) & (coords[:, 2] == 0)
    counts = [int(np.sum(central & (dist <= r))) for r in radii]
    slope = float(np.polyfit(np.log(radii), np.log(counts), 1)[0])
    lo, hi = slope_range
    checks = [
        AuditCheck(name="log-log-slope", passed=lo <= slope <= hi,
                   value=slope, tolerance=[lo, hi],
                   witness=None if lo <= slope <= hi else {
                       "radii": radii, "counts": counts}),
        AuditCheck(name="small-ball-count", passed=counts[0] >= 3,
                   value=float(counts[0]), tolerance=3.0,
                   witness=None if counts[0] >= 3 else {"radius": radii[0]}),
    ]
    return AuditReport("center-growth", checks, notes={
        "radii": radii, "counts": counts, "generators": model.gen_set})


# ---------------------------------------------------------------------------
# Claim-competition census


def _geometric_ratio(hist: np.ndarray, min_count: int = 32) -> Optional[float]:
    ratios = [hist[n + 1] / hist[n] for n in range(1, len(hist) - 1)
              if hist[n] >= min_count and hist[n + 1] > 0]
    if not ratios:
        return None
    return float(np.exp(np.mean(np.log(ratios))))


def competition_census(model: GroupModel, bseq: BoundarySequence,
                       bundle: ConstantsBundle, R: int, n_max: int,
                       seeds: Sequence[int],
                       decay_factor: float = 2.0) -> AuditReport:
    """Empirical claim counts against the geometric competition budget.

    Runs the grid kernels over the radius-R region: the mean number of
    level <= n_max claims per edge must stay below the closed-form bound
    with the run's recorded shell constant, and the winner-level histogram
    must decay geometrically at a rate within decay_factor of 2/3.
    """
    region = build_region(model, R)
    if region.n_edges < 1000:
        raise ValueError("competition census needs at least 10^3 edges")
    sw = sweeplib.BandSweep(model, bseq, bundle.K, R, n_max, seeds)
    eids = sw.grid_eids(region.coords[region.edge_v, :2], region.edge_gen)
    totals = np.zeros(len(seeds))
    for si in range(len(seeds)):
        counts = sw.claim_counts(seeds[si])
        totals[si] = float(counts[eids].mean())
    hist = np.zeros(n_max + 1, np.int64)
    for si, tables in sw:
        hist += np.bincount(tables.n[eids], minlength=n_max + 1)[:n_max + 1]
    mean_claims = float(totals.mean())
    bound = weightslib.competition_mean_bound(n_max, bundle.shell_c)
    ratio = _geometric_ratio(hist.astype(float))
    lo, hi = (2.0 / 3.0) / decay_factor, (2.0 / 3.0) * decay_factor
    checks = [
        AuditCheck(name="mean-claims", passed=mean_claims <= bound,
                   value=mean_claims, tolerance=bound,
                   witness=None if mean_claims <= bound else {
                       "per_seed": totals.tolist(),
                       "shell_c": bundle.shell_c}),
        AuditCheck(name="winner-level-decay",
                   passed=ratio is not None and lo <= ratio <= hi,
                   value=ratio if ratio is not None else math.nan,
                   tolerance=[lo, hi],
                   witness=None if ratio is not None and lo <= ratio <= hi
                   else {"histogram": hist.tolist()}),
    ]
    return AuditReport("competition", checks, notes={
        "edges": int(region.n_edges), "seeds": len(seeds), "n_max": n_max,
        "histogram": hist.tolist(), "shell_c": bundle.shell_c,
        "mean_bound": bound})
