"""Directional highway paths and their certificates.

A highway for direction b at level n is built in three stages:
  1. a balanced staircase in Z^d from the origin to the lattice target z_n,
  2. a lift to the group (verbatim relabeling when generators realize the
     standard basis; otherwise per-step quotient words, then loop erasure),
  3. a coarsely monotone segmentation used by the per-segment weight table.

Every stage emits measured certificates rather than trusting the a-priori
bounds; a certificate miss aborts the run loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CertificationError, IntegrityError, ResourceError
from .groups import (EdgePath, GroupModel, displacement, dtilde,
                     prefix_displacements, prefix_displacements_np)

MAX_MATERIALIZED_STEPS = 4_000_000
SCAN_MAX_WINDOW = 200


def rnd_half_zero(num: int, den: int) -> int:
    """Integer round(num/den) with halves toward zero; den > 0."""
    if num >= 0:
        return (2 * num + den - 1) // (2 * den)
    return -((-2 * num + den - 1) // (2 * den))


@dataclass
class LatticePath:
    """Balanced staircase from the origin to z; unit steps, length ||z||_1."""

    z: tuple
    m: int
    points: Optional[np.ndarray]    # (m+1, d) int64 vertices, None if huge
    axes: Optional[np.ndarray]      # (m,) int8 per-edge axis
    signs: tuple                    # per-axis step sign (sign of z_i)
    deviation: float                # max Euclidean distance to segment [0, z]
    deviation_exact: bool
    min_step_inner: float           # min <step, b> over steps

    @property
    def d(self) -> int:
        return len(self.z)

    def rounded_point(self, t) -> np.ndarray:
        """Closed-form anchor p_t = round(t z / m), vectorized over t."""
        t = np.asarray(t, dtype=np.int64)
        out = np.empty(t.shape + (self.d,), dtype=np.int64)
        for i, zi in enumerate(self.z):
            num = t * zi
            pos = (2 * np.abs(num) + self.m - 1) // (2 * self.m)
            out[..., i] = np.where(num >= 0, pos, -pos)
        return out


def _segment_distance(points: np.ndarray, z: np.ndarray) -> float:
    """Max distance from points to the segment [0, z]."""
    zz = float(z @ z)
    if zz == 0.0:
        return float(np.max(np.linalg.norm(points, axis=1))) if len(points) else 0.0
    P = points.astype(float)
    s = np.clip((P @ z) / zz, 0.0, 1.0)
    return float(np.max(np.linalg.norm(P - s[:, None] * z[None, :], axis=1)))


def staircase(z: Sequence[int], b: Sequence[float],
              materialize: Optional[bool] = None) -> LatticePath:
    """Monotone staircase to z whose anchors track the segment [0, z].

    Anchors p_t = round(t z/m) move by at most one unit per coordinate per
    step of t; gaps are bridged in fixed coordinate order, which keeps the
    path simple and of exactly minimal length.
    """
    z = tuple(int(c) for c in z)
    b = np.asarray(b, dtype=float)
    d = len(z)
    for zi, bi in zip(z, b):
        if zi != 0 and zi * bi <= 0:
            raise ValueError(f"target {z} is not sign-compatible with direction {b}")
    m = sum(abs(c) for c in z)
    signs = tuple(0 if c == 0 else (1 if c > 0 else -1) for c in z)
    if materialize is None:
        materialize = m <= MAX_MATERIALIZED_STEPS
    if m == 0:
        pts = np.zeros((1, d), dtype=np.int64)
        return LatticePath(z, 0, pts, np.zeros(0, dtype=np.int8), signs, 0.0, True, math.inf)

    za = np.array(z, dtype=np.int64)
    if materialize:
        t = np.arange(m + 1, dtype=np.int64)
        anchors = np.empty((m + 1, d), dtype=np.int64)
        for i, zi in enumerate(z):
            num = t * zi
            pos = (2 * np.abs(num) + m - 1) // (2 * m)
            anchors[:, i] = np.where(num >= 0, pos, -pos)
        deltas = np.abs(np.diff(anchors, axis=0))     # entries in {0, 1}
        if deltas.max(initial=0) > 1:
            raise CertificationError("staircase anchor moved by more than one unit")
        # unroll connectors in fixed coordinate order
        axis_pattern = np.tile(np.arange(d, dtype=np.int8), m)
        mask = deltas.reshape(-1).astype(bool)
        axes = axis_pattern[mask]
        if len(axes) != m:
            raise CertificationError("staircase length differs from ||z||_1")
        stepvecs = np.zeros((m, d), dtype=np.int64)
        stepvecs[np.arange(m), axes] = np.array(signs, dtype=np.int64)[axes]
        points = np.zeros((m + 1, d), dtype=np.int64)
        np.cumsum(stepvecs, axis=0, out=points[1:])
        if not np.array_equal(points[-1], za):
            raise CertificationError("staircase endpoint mismatch")
        deviation = _segment_distance(points, za.astype(float))
        exact = True
    else:
        stride = max(1, m // 65536)
        t = np.arange(0, m + 1, stride, dtype=np.int64)
        pts = np.empty((len(t), d), dtype=np.int64)
        for i, zi in enumerate(z):
            num = t * zi
            pos = (2 * np.abs(num) + m - 1) // (2 * m)
            pts[:, i] = np.where(num >= 0, pos, -pos)
        deviation = _segment_distance(pts, za.astype(float))
        points, axes, exact = None, None, False

    inner = math.inf
    for i in range(d):
        if z[i] != 0:
            inner = min(inner, signs[i] * float(b[i]))
    if inner <= 0.0:
        raise CertificationError("staircase step with nonpositive progress")
    bound = 2.0 * math.sqrt(d)
    if deviation > bound + 1e-9:
        raise CertificationError(
            f"staircase deviation {deviation:.6f} exceeds {bound:.6f}")
    return LatticePath(z, m, points, axes, signs, deviation, exact, inner)


# ---------------------------------------------------------------------------
# Lifting


def lift_simple(path: LatticePath, model: GroupModel) -> EdgePath:
    """Relabel staircase steps by the generators realizing the basis."""
    table = model.simple_axis_table()
    if table is None:
        raise ValueError(f"{model.name} admits no simple lift")
    if path.axes is None:
        raise ValueError("path must be materialized for lifting")
    steps = []
    for a in path.axes:
        gi, gsign = table[int(a)]
        steps.append((gi, path.signs[int(a)] * gsign))
    return EdgePath(model, model.identity, tuple(steps))


def quotient_step_words(model: GroupModel, budget: int = 200_000) -> dict:
    """Shortest quotient words realizing each signed standard direction.

    BFS in the almost-abelianization; keys (axis, sign), values step tuples.
    """
    targets = {}
    for axis in range(model.d):
        for sign in (1, -1):
            n = tuple(sign if j == axis else 0 for j in range(model.d))
            targets[(0, n)] = (axis, sign)
    words = {}
    start = model.aa_identity()
    seen = {start: ()}
    frontier = [start]
    moves = [(i, s) for i in range(len(model.generators)) for s in (1, -1)]
    aa_gens = {(i, s): model.project(model.gen(i, s)) for i, s in moves}
    while frontier and len(words) < len(targets):
        nxt = []
        for x in frontier:
            for mv in moves:
                y = model.aa_mul(x, aa_gens[mv])
                if y in seen:
                    continue
                seen[y] = seen[x] + (mv,)
                if y in targets and targets[y] not in words:
                    words[targets[y]] = seen[y]
                nxt.append(y)
                if len(seen) > budget:
                    raise ResourceError("quotient BFS budget exceeded")
        frontier = nxt
    missing = [k for k in targets.values() if k not in words]
    if missing:
        raise CertificationError(
            f"generators do not realize directions {missing} in the quotient")
    return words


def quotient_step_bound(model: GroupModel) -> int:
    """C = max word length needed per standard step."""
    words = quotient_step_words(model)
    return max(len(w) for w in words.values())


def lift_general(path: LatticePath, model: GroupModel,
                 words: Optional[dict] = None) -> EdgePath:
    if path.axes is None:
        raise ValueError("path must be materialized for lifting")
    if words is None:
        words = quotient_step_words(model)
    steps = []
    for a in path.axes:
        steps.extend(words[(int(a), path.signs[int(a)])])
    return EdgePath(model, model.identity, tuple(steps))


def loop_erase(p: EdgePath) -> EdgePath:
    """Chronological loop erasure; keeps start and endpoint."""
    model = p.model
    verts = [p.start]
    steps = []
    index = {p.start: 0}
    x = p.start
    for st in p.steps:
        x = model.mul(x, model.gen(st[0], st[1]))
        if x in index:
            k = index[x]
            for v in verts[k + 1:]:
                del index[v]
            del verts[k + 1:]
            del steps[k:]
        else:
            index[x] = len(verts)
            verts.append(x)
            steps.append(st)
    return EdgePath(model, p.start, tuple(steps))


def lift_path(path: LatticePath, model: GroupModel, mode: str,
              words: Optional[dict] = None) -> EdgePath:
    if mode == "simple":
        return lift_simple(path, model)
    lifted = lift_general(path, model, words)
    return loop_erase(lifted)


# ---------------------------------------------------------------------------
# Constants from scans


def displacement_edge_bound(model: GroupModel) -> float:
    """K' with ||D(ab) - D(a)||_2 <= K' |b| for all paths a, b."""
    qs = model.q_list()
    best = 0.0
    for i in range(len(model.generators)):
        for s in (1, -1):
            _, dstep = model.step_data(i, s)
            for q in qs:
                v = model.phi_apply(q, dstep)
                best = max(best, math.sqrt(sum(c * c for c in v)))
    eta_max = 0.0
    for q1 in qs:
        for q2 in qs:
            e = model.eta(q1, q2)
            for q3 in qs:
                v = model.phi_apply(q3, e)
                eta_max = max(eta_max, math.sqrt(sum(c * c for c in v)))
    return best + eta_max


def max_phi_norms(model: GroupModel) -> tuple:
    """(max ||D(f)^phi||_2, max ||eta^phi||_2) over generators and Q."""
    kp = displacement_edge_bound(model)
    qs = model.q_list()
    eta_max = 0.0
    for q1 in qs:
        for q2 in qs:
            e = model.eta(q1, q2)
            for q3 in qs:
                v = model.phi_apply(q3, e)
                eta_max = max(eta_max, math.sqrt(sum(c * c for c in v)))
    return kp - eta_max, eta_max


def monotonicity_scan(paths: Sequence[LatticePath], u: np.ndarray,
                      max_window: int = SCAN_MAX_WINDOW) -> tuple:
    """(k', M): every subpath of length >= M advances along u at rate >= k'.

    Empirical scan over window sizes up to max_window across the given
    staircases; degenerate directions raise rather than returning k' <= 0.
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    worst = np.full(max_window + 1, math.inf)
    for path in paths:
        if path.points is None:
            raise ValueError("scan needs materialized paths")
        proj = path.points.astype(float) @ u
        mlen = len(proj) - 1
        for w in range(1, min(max_window, mlen) + 1):
            gw = float(np.min(proj[w:] - proj[:-w])) / w
            worst[w] = min(worst[w], gw)
    finite = [w for w in range(1, max_window + 1) if math.isfinite(worst[w])]
    if not finite:
        raise CertificationError("no windows to scan")
    wmax = finite[-1]
    suffix_min = math.inf
    best = None
    for w in range(wmax, 0, -1):
        suffix_min = min(suffix_min, worst[w])
        if suffix_min > 0.0:
            best = (suffix_min, w)
    if best is None:
        raise CertificationError("direction admits no positive monotonicity rate")
    return best  # (k', M)


def segmentation_cap(kprime: float, M: int, Kp: float, C: int) -> tuple:
    """Edge-count cap 2 M' C with M' = max(M, ceil((2 K' C + 1)/k'))."""
    mp = max(M, math.ceil((2.0 * Kp * C + 1.0) / kprime))
    return 2 * mp * C, mp


# ---------------------------------------------------------------------------
# Segmentation and the coarse certificate


@dataclass
class CoarsePath:
    path: EdgePath
    level: int
    u: np.ndarray                    # Euclidean unit direction
    boundaries: list                 # segment cut indices, [0, ..., len(path)]
    progress: list                   # per-segment advance along u
    prefix_disp: np.ndarray          # (len+1, d) displacement prefixes
    certificate: dict = field(default_factory=dict)

    @property
    def segment_count(self):
        return len(self.boundaries) - 1


def segment_coarse(path: EdgePath, u: np.ndarray, cap: int, level: int) -> CoarsePath:
    """Greedy cut: close a segment at the first unit of progress along u."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    try:
        prefixes = prefix_displacements_np(path)
    except IntegrityError:
        prefixes = np.array([d for _, d in prefix_displacements(path)], dtype=np.int64)
    proj = prefixes.astype(float) @ u
    n = len(path.steps)
    boundaries = [0]
    progress = []
    cut = 0
    for j in range(1, n + 1):
        if proj[j] - proj[cut] >= 1.0:
            boundaries.append(j)
            progress.append(proj[j] - proj[cut])
            cut = j
        elif j - cut > cap:
            raise CertificationError(
                f"segment exceeded cap {cap} without reaching unit progress "
                f"(level {level})")
    if cut < n:
        # absorb the tail into the final segment
        if len(boundaries) > 1:
            tail_start = boundaries[-2]
            boundaries[-1] = n
            progress[-1] = proj[n] - proj[tail_start]
        else:
            boundaries.append(n)
            progress.append(proj[n] - proj[0])
    for i, pr in enumerate(progress):
        if pr <= 0.0:
            raise CertificationError(
                f"segment {i} has nonpositive progress {pr} (level {level})")
    return CoarsePath(path, level, u, boundaries, progress, prefixes)


def certify_coarse(cp: CoarsePath, model: GroupModel) -> dict:
    """Measured certificate; the run's C0' is the max over these reports."""
    u = cp.u
    pre = cp.prefix_disp.astype(float)
    n_edges = len(cp.path.steps)
    target = (2.0 ** cp.level) * u
    endpoint_dev = float(np.linalg.norm(pre[-1] - target))
    para = pre @ u
    perp = pre - para[:, None] * u[None, :]
    perp_dev = float(np.max(np.linalg.norm(perp, axis=1)))
    seg_lengths = [b2 - b1 for b1, b2 in zip(cp.boundaries, cp.boundaries[1:])]
    max_seg_len = max(seg_lengths) if seg_lengths else 0
    min_progress = min(cp.progress) if cp.progress else math.inf

    # segment displacements under every conjugation twist
    qs = model.q_list()
    mats = [np.asarray(model.phi_mat(q), dtype=float) for q in qs]
    max_seg_disp = 0.0
    for b1, b2 in zip(cp.boundaries, cp.boundaries[1:]):
        dv = pre[b2] - pre[b1]
        for M in mats:
            max_seg_disp = max(max_seg_disp, float(np.linalg.norm(M @ dv)))
    _, eta_max = max_phi_norms(model)

    c0p = max(endpoint_dev, perp_dev, float(max_seg_len), max_seg_disp,
              (1.0 / min_progress) if min_progress < math.inf else 0.0,
              eta_max, math.sqrt(model.d) / 2.0, 1.0)
    report = {
        "level": cp.level,
        "edges": n_edges,
        "endpoint_dev": endpoint_dev,
        "perp_dev": perp_dev,
        "max_segment_len": int(max_seg_len),
        "max_segment_disp_phi": max_seg_disp,
        "min_progress": float(min_progress),
        "segments": cp.segment_count,
        "length_const": n_edges / (2.0 ** cp.level),
        "c0p": c0p,
    }
    cp.certificate = report
    return report


def certify_reversal_fails(cp: CoarsePath) -> bool:
    """Sanity: the reversed path cannot be coarsely monotone along u."""
    pre = cp.prefix_disp.astype(float)
    proj = pre @ cp.u
    return bool(proj[-1] > 0.0)
