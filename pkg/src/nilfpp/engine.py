"""First passage over finite regions.

A region is the closed word ball of radius R with its interior edges.  Any
path that leaves the ball must first touch the boundary sphere, so a source
distance is certified exact whenever it does not exceed the cheapest boundary
distance; larger values are flagged stale instead of silently trusted.

Passage to an abelianized target z is estimated lift by lift: average the
per-seed distances at each lift of z, then take the smallest lift average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import sweep as sweeplib
from .errors import IntegrityError
from .groups import GroupModel, word_ball
from .norms import BoundarySequence, ConstantsBundle
from .weights import SiteMarks, resolve_weight

_COORD_LIMIT = 1 << 30


@dataclass
class Region:
    model: GroupModel
    R: int
    coords: np.ndarray           # (N, 3) int64 encoded lanes
    word_dist: np.ndarray        # (N,) int32
    adj: np.ndarray              # (N, 2g) int32, columns [+gens | -gens]
    edge_v: np.ndarray           # (E,) int64 canonical edge start vertex
    edge_gen: np.ndarray         # (E,) int64 generator index
    edge_to: np.ndarray          # (E,) int64 end vertex
    indptr: np.ndarray           # CSR over directed arcs
    indices: np.ndarray
    entry_edge: np.ndarray       # arc -> canonical edge index
    tuples: Optional[list]       # vertex tuples when built without a kernel

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_v.size

    @property
    def boundary(self) -> np.ndarray:
        return self.word_dist == self.R

    def vertex_tuple(self, v: int):
        if self.tuples is not None:
            return self.tuples[v]
        ln = len(self.model.encode_lanes(self.model.identity))
        return tuple(int(c) for c in self.coords[v, :ln])

    def abelian_arrays(self):
        """(q, n) per vertex, vectorized where the lane layout allows."""
        kind = self.model.numba_kind
        if kind == 0:
            q = np.zeros(self.n_vertices, np.int64)
            return q, self.coords[:, :2].copy()
        if kind == 1:
            q = np.zeros(self.n_vertices, np.int64)
            return q, self.coords[:, [0, 2]].copy()
        if kind == 2:
            return self.coords[:, 0].copy(), self.coords[:, 1:3].copy()
        qs = np.empty(self.n_vertices, np.int64)
        ns = np.empty((self.n_vertices, self.model.d), np.int64)
        for v in range(self.n_vertices):
            q, n = self.model.project(self.vertex_tuple(v))
            qs[v] = q
            ns[v] = n
        return qs, ns


def build_region(model: GroupModel, R: int, cap_hint: int = 1 << 13,
                 force_python: bool = False) -> Region:
    if model.numba_kind is not None and not force_python:
        coords, dist, adj = sweeplib.build_ball(model, R, cap_hint=cap_hint)
        tuples = None
    else:
        ball = word_ball(model, R)
        tuples = list(ball.keys())
        index = {x: i for i, x in enumerate(tuples)}
        N = len(tuples)
        g = len(model.generators)
        ln = len(model.encode_lanes(model.identity))
        coords = np.zeros((N, 3), np.int64)
        dist = np.zeros(N, np.int32)
        adj = np.full((N, 2 * g), -1, np.int32)
        for i, x in enumerate(tuples):
            coords[i, :ln] = model.encode_lanes(x)
            dist[i] = ball[x]
            for j in range(g):
                for s, col in ((1, j), (-1, g + j)):
                    nb = index.get(model.mul(x, model.gen(j, s)))
                    if nb is not None:
                        adj[i, col] = nb
    N = coords.shape[0]
    g = len(model.generators)
    pos = adj[:, :g].astype(np.int64)
    mask = (pos >= 0).ravel()
    edge_v = np.repeat(np.arange(N, dtype=np.int64), g)[mask]
    edge_gen = np.tile(np.arange(g, dtype=np.int64), N)[mask]
    edge_to = pos.ravel()[mask]
    E = edge_v.size
    rows = np.concatenate([edge_v, edge_to])
    cols = np.concatenate([edge_to, edge_v])
    ent = np.concatenate([np.arange(E, dtype=np.int64)] * 2)
    order = np.argsort(rows, kind="stable")
    indices = cols[order].astype(np.int32)
    entry_edge = ent[order]
    counts = np.bincount(rows, minlength=N)
    indptr = np.zeros(N + 1, np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Region(model, int(R), coords, dist, adj, edge_v, edge_gen, edge_to,
                  indptr, indices, entry_edge, tuples)


def distances_from_identity(region: Region, edge_weights: np.ndarray,
                            predecessors: bool = False):
    if edge_weights.shape != (region.n_edges,):
        raise IntegrityError("edge weight vector does not match the region")
    data = edge_weights[region.entry_edge]
    graph = csr_matrix((data, region.indices, region.indptr),
                       shape=(region.n_vertices, region.n_vertices))
    return dijkstra(graph, directed=True, indices=0,
                    return_predecessors=predecessors)


def boundary_minimum(region: Region, dist: np.ndarray) -> float:
    b = region.boundary
    return float(dist[b].min()) if b.any() else math.inf


# ---------------------------------------------------------------------------
# Weight streams: (seed_index, per-edge weights) per seed


def uniform_stream(region: Region, seeds: Sequence[int],
                   value: float = 1.0) -> Iterator:
    w = np.full(region.n_edges, float(value))
    for si in range(len(seeds)):
        yield si, w


def band_eligible(model: GroupModel, mode: str) -> bool:
    return (model.numba_kind == 0 and mode == "simple"
            and model.generators == ((1, 0), (0, 1)))


def field_stream(region: Region, bundle: ConstantsBundle, n_max: int,
                 seeds: Sequence[int], bseq: Optional[BoundarySequence] = None,
                 configs: Optional[dict] = None, n_split: Optional[int] = None,
                 chunk: Optional[int] = None, record_budget: int = 192 << 20,
                 with_levels: bool = False) -> Iterator:
    """Per-seed canonical-edge weights from the stationary field.

    Rank-2 simple mode with standard generators runs on the grid kernels and
    needs bseq; other compiled models run on the pair kernels and need the
    per-level configs.  with_levels adds the winner-level vector.
    """
    model = region.model
    if band_eligible(model, bundle.mode):
        if bseq is None:
            raise ValueError("band sweep needs the boundary sequence")
        kw = {} if chunk is None else {"chunk_cols": chunk}
        sw = sweeplib.BandSweep(model, bseq, bundle.K, region.R, n_max, seeds,
                                n_split=n_split, record_budget=record_budget, **kw)
        eids = sw.grid_eids(region.coords[region.edge_v, :2], region.edge_gen)
        for si, t in sw:
            if with_levels:
                yield si, t.w[eids], t.n[eids]
            else:
                yield si, t.w[eids]
        return
    if model.numba_kind is not None:
        if configs is None:
            raise ValueError("pair sweep needs per-level configurations")
        kw = {} if chunk is None else {"chunk": chunk}
        sw = sweeplib.GenericSweep(model, region.coords, region.adj, configs,
                                   bundle.K, n_max, seeds, n_split=n_split,
                                   record_budget=record_budget, **kw)
        g = len(model.generators)
        slots = region.edge_v * g + region.edge_gen
        for si, t in sw:
            if with_levels:
                yield si, t.w[slots], t.n[slots]
            else:
                yield si, t.w[slots]
        return
    yield from reference_stream(region, bundle, n_max, seeds, configs,
                                with_levels=with_levels)


def reference_stream(region: Region, bundle: ConstantsBundle, n_max: int,
                     seeds: Sequence[int], configs: dict,
                     with_levels: bool = False) -> Iterator:
    """Edge-by-edge resolution; the slow path for models without kernels."""
    if configs is None:
        raise ValueError("reference stream needs per-level configurations")
    model = region.model
    cfg_list = [configs[n] for n in sorted(configs)]
    for si, seed in enumerate(seeds):
        marks = SiteMarks(seed, model)
        w = np.empty(region.n_edges)
        lv = np.zeros(region.n_edges, np.uint8)
        for k in range(region.n_edges):
            edge = (region.vertex_tuple(int(region.edge_v[k])),
                    int(region.edge_gen[k]))
            q = resolve_weight(marks, edge, cfg_list, n_max, bundle.K)
            w[k] = q.weight
            lv[k] = q.winner_level
        if with_levels:
            yield si, w, lv
        else:
            yield si, w


# ---------------------------------------------------------------------------
# Lift lookup and the passage estimator


class TargetIndex:
    """Sorted lookup from abelianized points to their trivial-fiber lifts."""

    def __init__(self, region: Region):
        q, n = region.abelian_arrays()
        if np.abs(n).max(initial=0) >= _COORD_LIMIT:
            raise IntegrityError("abelian coordinates overflow the sort key")
        self.d = n.shape[1]
        idx0 = np.flatnonzero(q == 0)
        keys = self._encode(n[idx0])
        order = np.argsort(keys, kind="stable")
        self.vidx = idx0[order]
        self.keys = keys[order]

    def _encode(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if n.ndim == 1:
            n = n[None, :]
        key = np.zeros(n.shape[0], np.int64)
        for c in range(self.d):
            key = key * (2 * _COORD_LIMIT) + (n[:, c] + _COORD_LIMIT)
        return key

    def lifts(self, z) -> np.ndarray:
        key = self._encode(np.asarray(z, dtype=np.int64))[0]
        lo = np.searchsorted(self.keys, key, side="left")
        hi = np.searchsorted(self.keys, key, side="right")
        return self.vidx[lo:hi]


@dataclass
class PassageEstimate:
    targets: list                # abelian targets as tuples
    value: np.ndarray            # (T,) mean-then-min estimate, inf if no lift
    stale: np.ndarray            # (T,) bool: chosen lift left the certified zone
    se: np.ndarray               # (T,) sample standard error at the chosen lift
    samples: np.ndarray          # (S, T) per-seed distance at the chosen lift
    lift_vidx: np.ndarray        # (T,) chosen lift vertex, -1 if none
    lift_count: np.ndarray       # (T,) lifts present in the region
    dmin: np.ndarray             # (S,) per-seed cheapest boundary distance
    n_seeds: int


@dataclass
class AbelianCloud:
    points: np.ndarray           # (M, d) abelianized lattice points, fiber q=0
    value: np.ndarray            # (M,) mean-then-min passage estimate
    stale: np.ndarray            # (M,) bool


@dataclass
class SimulationData:
    estimate: PassageEstimate
    extra_samples: Optional[np.ndarray]   # (S, X) distances at extra vertices
    cloud: Optional[AbelianCloud]
    level_hist: Optional[np.ndarray]      # winner-level counts, index = level


def simulate(region: Region, weight_stream: Iterable, targets, n_seeds: int,
             extra_vertices: Optional[np.ndarray] = None,
             want_cloud: bool = False,
             want_level_hist: bool = False) -> SimulationData:
    """One pass over the seeds feeding every consumer of the distances.

    want_level_hist requires a stream that yields winner levels.
    """
    tindex = TargetIndex(region)
    targets = [tuple(int(c) for c in z) for z in targets]
    lift_lists = [tindex.lifts(z) for z in targets]
    offsets = np.zeros(len(targets) + 1, np.int64)
    np.cumsum([len(l) for l in lift_lists], out=offsets[1:])
    all_lifts = (np.concatenate(lift_lists) if offsets[-1]
                 else np.zeros(0, np.int64))
    vals = np.full((n_seeds, offsets[-1]), math.inf)
    dmin = np.full(n_seeds, math.inf)
    seen = np.zeros(n_seeds, bool)
    extra = None
    if extra_vertices is not None:
        extra_vertices = np.asarray(extra_vertices, dtype=np.int64)
        extra = np.full((n_seeds, extra_vertices.size), math.inf)
    sums = np.zeros(region.n_vertices) if want_cloud else None
    vstale = np.zeros(region.n_vertices, bool) if want_cloud else None
    hist = np.zeros(256, np.int64) if want_level_hist else None
    for item in weight_stream:
        si, w = item[0], item[1]
        dist = distances_from_identity(region, w)
        dmin[si] = boundary_minimum(region, dist)
        vals[si] = dist[all_lifts]
        seen[si] = True
        if extra is not None:
            extra[si] = dist[extra_vertices]
        if want_cloud:
            sums += dist
            vstale |= dist > dmin[si]
        if want_level_hist:
            if len(item) < 3:
                raise IntegrityError("level histogram needs a level-aware stream")
            hist += np.bincount(item[2], minlength=256)
    if not seen.all():
        raise IntegrityError("weight stream did not cover every seed")
    stale_lift = (vals > dmin[:, None]).any(axis=0)
    mean_lift = vals.mean(axis=0)
    T = len(targets)
    value = np.full(T, math.inf)
    stale = np.zeros(T, bool)
    se = np.full(T, math.nan)
    samples = np.full((n_seeds, T), math.inf)
    lift_vidx = np.full(T, -1, np.int64)
    lift_count = np.diff(offsets)
    for ti in range(T):
        lo, hi = offsets[ti], offsets[ti + 1]
        if lo == hi:
            stale[ti] = True
            continue
        j = lo + int(np.argmin(mean_lift[lo:hi]))
        value[ti] = mean_lift[j]
        stale[ti] = bool(stale_lift[j])
        samples[:, ti] = vals[:, j]
        lift_vidx[ti] = all_lifts[j]
        if n_seeds > 1:
            se[ti] = float(np.std(vals[:, j], ddof=1) / math.sqrt(n_seeds))
        else:
            se[ti] = 0.0
    est = PassageEstimate(targets, value, stale, se, samples, lift_vidx,
                          lift_count, dmin, n_seeds)
    cloud = None
    if want_cloud:
        means = sums / n_seeds
        fiber = tindex.vidx
        order = np.lexsort((means[fiber], tindex.keys))
        skeys = tindex.keys[order]
        first = np.flatnonzero(np.concatenate(([True], skeys[1:] != skeys[:-1])))
        chosen = fiber[order[first]]
        q, n = region.abelian_arrays()
        cloud = AbelianCloud(n[chosen], means[chosen], vstale[chosen])
    return SimulationData(est, extra, cloud,
                          hist[: int(hist.nonzero()[0].max(initial=0)) + 1]
                          if hist is not None else None)


def estimate_passage(region: Region, weight_stream: Iterable, targets,
                     n_seeds: int) -> PassageEstimate:
    return simulate(region, weight_stream, targets, n_seeds).estimate
