"""The stationary edge-weight field.

Every site x carries hash-derived marks (Y_x, Z_x).  A site with Y_x = n
seeds a translated copy of the level-n highway configuration: the edges of
the translated path are fast with the configured table, all other edges
touching the translated path get the slow weight K.  Overlapping claims are
resolved by the larger level, then the larger Z mark, with a final
deterministic digest tie break.  Edges nobody claims get K.

Resolution is a pure function of (seed, edge, n_max): the same answer comes
out whether an edge is queried alone (resolve_weight below) or swept in bulk
by the kernels in sweep.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import hashing
from . import paths
from .errors import CertificationError
from .groups import EdgePath, GroupModel
from .norms import (BoundarySequence, ConstantsBundle, choose_K,
                    lattice_target)
from .paths import (CoarsePath, LatticePath, certify_coarse, lift_path,
                    segment_coarse, staircase)


class SiteMarks:
    """Hash-backed marks; same (seed, x) always yields the same pair."""

    def __init__(self, seed: int, model: GroupModel):
        self.seed = int(seed)
        self.model = model
        self._level_key = hashing.seed_key(self.seed, hashing.STREAM_LEVEL)
        self._tie_key = hashing.seed_key(self.seed, hashing.STREAM_TIE)

    def _state(self, x) -> int:
        return hashing.site_digest(self.model.tag, self.model.encode_lanes(x))

    def y(self, x) -> int:
        return hashing.y_from_u64(hashing.finalize(self._state(x), self._level_key))

    def z_u64(self, x) -> int:
        return hashing.finalize(self._state(x), self._tie_key)

    def digest(self, x) -> int:
        return self._state(x)

    def marks(self, x) -> tuple:
        return self.y(x), hashing.u64_to_unit(self.z_u64(x))


class TranslatedMarks:
    """Left-translated view: (T_g marks)(x) = marks(g^{-1} x)."""

    def __init__(self, base, g):
        self.base = base
        self.model = base.model
        self.g_inv = base.model.inv(g)

    def y(self, x) -> int:
        return self.base.y(self.model.mul(self.g_inv, x))

    def z_u64(self, x) -> int:
        return self.base.z_u64(self.model.mul(self.g_inv, x))

    def digest(self, x) -> int:
        return self.base.digest(self.model.mul(self.g_inv, x))


class DictMarks:
    """Explicit marks for tests; everything not listed is inert."""

    def __init__(self, model: GroupModel, y_map: dict, z_map: Optional[dict] = None):
        self.model = model
        self.y_map = dict(y_map)
        self.z_map = dict(z_map or {})

    def y(self, x) -> int:
        return self.y_map.get(x, 0)

    def z_u64(self, x) -> int:
        return self.z_map.get(x, 1)

    def digest(self, x) -> int:
        return hashing.site_digest(self.model.tag, self.model.encode_lanes(x))


# ---------------------------------------------------------------------------
# Highway configurations


def canonical_edge(model: GroupModel, start, gen_idx: int, sign: int):
    """Undirected edge {start, start*s^sign} keyed at its positive endpoint."""
    if sign > 0:
        return (start, gen_idx)
    return (model.mul(start, model.gen(gen_idx, -1)), gen_idx)


@dataclass(eq=False)
class HighwayConfiguration:
    model: GroupModel
    level: int
    b: np.ndarray                  # boundary point of the target ball
    z: tuple                       # lattice target
    mode: str
    lattice: LatticePath
    path: EdgePath
    coarse: Optional[CoarsePath]
    fast: dict                     # canonical edge -> weight
    vertices: tuple                # path vertex tuples, in order
    K: float
    shell_size: int                # |E_n|

    def weight(self, edge) -> Optional[float]:
        """Table weight of a canonical edge, K on the shell, None outside."""
        w = self.fast.get(edge)
        if w is not None:
            return w
        if edge in self._shell_index:
            return self.K
        return None

    def __post_init__(self):
        m = self.model
        shell = set(self.fast)
        for v in self.vertices:
            for i in range(len(m.generators)):
                for s in (1, -1):
                    shell.add(canonical_edge(m, v, i, s))
        self._shell_index = shell
        self.shell_size = len(shell)

    def edges(self):
        for e in self._shell_index:
            yield e, self.fast.get(e, self.K)

    def fast_total(self) -> float:
        return sum(self.fast.values())


def simple_weight_table(b: np.ndarray) -> np.ndarray:
    """Per-axis fast weight |pi_i(b)| / ||b||_2^2."""
    b = np.asarray(b, dtype=float)
    return np.abs(b) / float(b @ b)


def build_configuration(level: int, b: np.ndarray, model: GroupModel,
                        constants: ConstantsBundle, mode: str,
                        words: Optional[dict] = None,
                        cap: Optional[int] = None) -> HighwayConfiguration:
    b = np.asarray(b, dtype=float)
    z = lattice_target(b, level)
    lat = staircase(z, b)
    path = lift_path(lat, model, mode, words)
    verts = tuple(path.vertices())
    K = constants.K
    fast = {}
    coarse = None
    if mode == "simple":
        wtab = simple_weight_table(b)
        x = model.identity
        for (gi, sg), axis in zip(path.steps, lat.axes):
            e = canonical_edge(model, x, gi, sg)
            fast[e] = float(wtab[int(axis)])
            x = model.mul(x, model.gen(gi, sg))
    else:
        if cap is None:
            cap = max(2 * constants.Mp * constants.C, 1)
        u = b / np.linalg.norm(b)
        coarse = segment_coarse(path, u, cap, level)
        certify_coarse(coarse, model)
        bnorm = float(np.linalg.norm(b))
        x = model.identity
        seg = 0
        bounds = coarse.boundaries
        for j, (gi, sg) in enumerate(path.steps):
            while j >= bounds[seg + 1]:
                seg += 1
            seg_len = bounds[seg + 1] - bounds[seg]
            w = coarse.progress[seg] / (bnorm * seg_len)
            fast[canonical_edge(model, x, gi, sg)] = w
            x = model.mul(x, model.gen(gi, sg))
    for e, w in fast.items():
        if not (0.0 < w <= K + 1e-12):
            raise CertificationError(
                f"fast weight {w} outside (0, K] at level {level}")
    hc = HighwayConfiguration(model, level, b, z, mode, lat, path, coarse,
                              fast, verts, K, 0)
    return hc


def shell_count_closed_form(m: int, gen_count: int) -> int:
    """|E_n| for a simple path with only consecutive adjacencies."""
    return (2 * gen_count - 1) * m + 2 * gen_count


def truncation_error_bound(n_max: int, shell_c: float) -> float:
    """Per-edge probability that ignoring levels above n_max changes a weight."""
    return 3.0 * shell_c * (2.0 / 3.0) ** (n_max + 1)


def competition_mean_bound(n_max: int, shell_c: float) -> float:
    """Upper bound for E |X_f| with levels truncated at n_max."""
    return shell_c * sum((2.0 / 3.0) ** n for n in range(1, n_max + 1))


# ---------------------------------------------------------------------------
# Reference resolution (per edge; the sweep kernels must agree exactly)


@dataclass
class EdgeWeightQuery:
    edge: tuple
    weight: float
    winner_level: int             # 0 when no competitor claimed the edge
    winner_site: Optional[tuple]


def resolve_weight(marks, edge, configs: Sequence[HighwayConfiguration],
                   n_max: int, K: float) -> EdgeWeightQuery:
    """Enumerate claims on one edge and resolve the competition.

    Candidates for level n are x = u * g^{-1} over shell edges (g, i) of the
    level-n configuration with i matching the queried label; x claims the
    edge iff Y_x = n.  Larger (level, Z, digest) wins.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    model = marks.model
    u, gi = edge
    best = None
    for hc in configs:
        if hc.level > n_max:
            continue
        n = hc.level
        for (g, gi2) in hc._shell_index:
            if gi2 != gi:
                continue
            x = model.mul(u, model.inv(g))
            if marks.y(x) != n:
                continue
            key = (n, marks.z_u64(x), marks.digest(x))
            if best is None or key > best[0]:
                best = (key, x, (g, gi2), hc)
    if best is None:
        return EdgeWeightQuery(edge, K, 0, None)
    _, x, shell_edge, hc = best
    w = hc.fast.get(shell_edge, hc.K)
    return EdgeWeightQuery(edge, w, hc.level, x)


def competitor_count(marks, edge, configs, n_max: int) -> int:
    """|X_f| truncated at n_max (claims by any level, win or lose)."""
    model = marks.model
    u, gi = edge
    count = 0
    for hc in configs:
        if hc.level > n_max:
            continue
        for (g, gi2) in hc._shell_index:
            if gi2 != gi:
                continue
            if marks.y(model.mul(u, model.inv(g))) == hc.level:
                count += 1
    return count


# ---------------------------------------------------------------------------
# Deriving the constants bundle from the data


def derive_constants(model, spec, seed: int, n_max: int, mode: Optional[str] = None,
                     config_levels: Optional[Sequence[int]] = None):
    """Measure data-dependent constants and build per-level configurations.

    Returns (bundle, configs) where configs maps level -> HighwayConfiguration
    for each requested level (default all of 1..n_max).  Pass a smaller
    config_levels when closed-form tables stand in for the high levels; the
    shell density constant then still covers every level via the closed form
    where possible.
    """
    mode = mode or model.default_mode
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if config_levels is None:
        levels = list(range(1, n_max + 1))
    else:
        levels = sorted(set(int(n) for n in config_levels))
        if levels and (levels[0] < 1 or levels[-1] > n_max):
            raise ValueError("config levels must lie in 1..n_max")
    h = spec.inscribed_radius()
    C0 = 2.0 * math.sqrt(model.d)
    bseq = BoundarySequence(spec, seed)
    bs = {n: bseq.boundary_point(n) for n in range(1, n_max + 1)}
    max_b = max(float(np.linalg.norm(b)) for b in bs.values())
    g = len(model.generators)

    if mode == "simple":
        K = choose_K(h, "simple", C0=C0)
        bundle = ConstantsBundle(mode=mode, h=h, K=K, C0=C0, max_b_norm2=max_b)
        shell_c = 0.0
        for n in range(1, n_max + 1):
            m = sum(abs(c) for c in lattice_target(bs[n], n))
            shell_c = max(shell_c, shell_count_closed_form(m, g) / 2.0 ** n)
        bundle.shell_c = shell_c
        bundle.validate()
        configs = {n: build_configuration(n, bs[n], model, bundle, mode)
                   for n in levels}
        return bundle, configs

    words = paths.quotient_step_words(model)
    C = paths.quotient_step_bound(model)
    Kp = paths.displacement_edge_bound(model)
    max_disp, max_eta = paths.max_phi_norms(model)
    Mp = 1
    for n in range(1, n_max + 1):
        z = lattice_target(bs[n], n)
        lat = paths.staircase(z, bs[n], materialize=True)
        u = bs[n] / np.linalg.norm(bs[n])
        kpn, Mn = paths.monotonicity_scan([lat], u)
        _, mpn = paths.segmentation_cap(kpn, Mn, Kp, C)
        Mp = max(Mp, mpn)

    provisional = ConstantsBundle(mode=mode, h=h, K=1e300, C0=C0, Kp=Kp, C=C,
                                  Mp=Mp, max_disp_phi=max_disp,
                                  max_eta_phi=max_eta, max_b_norm2=max_b)
    c0p = 1.0
    shell_c = 0.0
    for n in levels:
        hc = build_configuration(n, bs[n], model, provisional, mode, words=words)
        c0p = max(c0p, hc.coarse.certificate["c0p"])
        shell_c = max(shell_c, hc.shell_size / 2.0 ** n)
    K = choose_K(h, "general", C0p=c0p, max_disp_phi=max_disp, max_eta_phi=max_eta)
    bundle = ConstantsBundle(mode=mode, h=h, K=K, C0=C0, C0p=c0p, Kp=Kp, C=C,
                             Mp=Mp, k_lower=1.0 / (c0p ** 2 * max_b),
                             shell_c=shell_c, max_disp_phi=max_disp,
                             max_eta_phi=max_eta, max_b_norm2=max_b)
    bundle.validate()
    configs = {n: build_configuration(n, bs[n], model, bundle, mode, words=words)
               for n in levels}
    return bundle, configs
