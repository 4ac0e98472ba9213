"""Compiled sweep kernels against the per-edge reference resolver."""

import numpy as np
import pytest

from nilfpp.errors import ResourceError
from nilfpp.groups import parse_group, word_ball
from nilfpp.norms import BoundarySequence, lp_norm
from nilfpp.sweep import BandSweep, GenericSweep, build_ball
from nilfpp.weights import SiteMarks, competitor_count, derive_constants, resolve_weight


@pytest.mark.parametrize("name,radius", [
    ("zd:2", 7), ("heisenberg:XY", 5), ("heisenberg:XYZ", 4),
    ("semidirect-zi", 5)])
def test_ball_bfs_matches_reference(name, radius):
    model = parse_group(name)
    coords, dist, adj = build_ball(model, radius)
    ref = word_ball(model, radius)
    assert coords.shape[0] == len(ref)
    ln = len(model.encode_lanes(model.identity))
    seen = {}
    for idx in range(coords.shape[0]):
        lanes = tuple(int(c) for c in coords[idx, :ln])
        seen[lanes] = int(dist[idx])
    assert seen == {model.encode_lanes(x): d for x, d in ref.items()}
    # adjacency closes over the ball and marks exits with -1
    g = len(model.generators)
    lane_to_idx = {tuple(int(c) for c in coords[i, :ln]): i
                   for i in range(coords.shape[0])}
    inv_map = {v: k for k, v in lane_to_idx.items()}
    # adjacency columns are grouped: [+0..+g-1 | -0..-g-1]
    for idx in list(range(0, coords.shape[0], max(1, coords.shape[0] // 40))):
        x = inv_map[idx]
        for i in range(g):
            for col, s in ((i, 1), (g + i, -1)):
                nbl = model.encode_lanes(
                    model.mul(_decode(model, x), model.gen(i, s)))
                want = lane_to_idx.get(nbl, -1)
                assert adj[idx, col] == want


def _decode(model, lanes):
    # lane encodings used by the kernels are the element tuples themselves
    return tuple(lanes)


def test_ball_bfs_skew_generators():
    model = parse_group("zd:2", generators=((2, 1), (1, 1)))
    coords, dist, adj = build_ball(model, 4)
    ref = word_ball(model, 4)
    assert coords.shape[0] == len(ref)
    got = {tuple(int(c) for c in coords[i, :2]): int(dist[i])
           for i in range(coords.shape[0])}
    assert got == {k: v for k, v in ref.items()}


def test_ball_bfs_resource_and_kind_errors():
    import sys
    sys.path.insert(0, __file__.rsplit("/", 1)[0])
    from oddline import OddLineModel

    with pytest.raises(ValueError):
        build_ball(OddLineModel(), 3)
    with pytest.raises(ResourceError):
        build_ball(parse_group("zd:2"), 200, cap_hint=64, max_cap=128)


def _edge_index(model, coords, adj):
    """canonical edge tuple -> (eid, both endpoints inside)"""
    ln = len(model.encode_lanes(model.identity))
    g = len(model.generators)
    elems = [tuple(int(c) for c in coords[i, :ln]) for i in range(coords.shape[0])]
    out = {}
    for y in range(coords.shape[0]):
        for i in range(g):
            nb = adj[y, i]
            if nb < 0:
                continue
            out[(elems[y], i)] = y * g + i
    return out, elems


@pytest.mark.parametrize("name,seed,n_max,radius", [
    ("heisenberg:XYZ", 11, 4, 4), ("semidirect-zi", 3, 4, 4)])
def test_generic_sweep_matches_reference(name, seed, n_max, radius):
    model = parse_group(name)
    spec = lp_norm(2, 2) if name.startswith("heis") else lp_norm(2, "inf")
    bundle, configs = derive_constants(model, spec, seed, n_max)
    coords, dist, adj = build_ball(model, radius)
    seeds = [seed, seed + 1]
    sweep = GenericSweep(model, coords, adj, configs, bundle.K, n_max, seeds)
    cfgs = [configs[n] for n in sorted(configs)]
    edge_ids, _ = _edge_index(model, coords, adj)
    for si, tables in sweep:
        marks = SiteMarks(seeds[si], model)
        for edge, eid in edge_ids.items():
            ref = resolve_weight(marks, edge, cfgs, n_max, bundle.K)
            assert tables.w[eid] == ref.weight, (edge, seeds[si])
            assert tables.n[eid] == ref.winner_level


def test_generic_sweep_split_and_chunk_invariance(heis_xyz):
    spec = lp_norm(2, 2)
    bundle, configs = derive_constants(heis_xyz, spec, 11, 4)
    coords, dist, adj = build_ball(heis_xyz, 4)
    seeds = [11, 12, 13]

    def snapshot(**kw):
        out = []
        for si, t in GenericSweep(heis_xyz, coords, adj, configs, bundle.K,
                                  4, seeds, **kw):
            out.append((t.w.copy(), t.n.copy(), t.z.copy(), t.dig.copy()))
        return out

    base = snapshot()
    for kw in (dict(n_split=1), dict(n_split=4), dict(chunk=7),
               dict(n_split=2, chunk=13)):
        other = snapshot(**kw)
        for (aw, an, az, ad), (bw, bn, bz, bd) in zip(base, other):
            assert np.array_equal(aw, bw) and np.array_equal(an, bn)
            assert np.array_equal(az, bz) and np.array_equal(ad, bd)


def test_generic_sweep_rejects_level_gaps(heis_xyz):
    spec = lp_norm(2, 2)
    bundle, configs = derive_constants(heis_xyz, spec, 11, 3)
    coords, dist, adj = build_ball(heis_xyz, 3)
    partial = {n: configs[n] for n in (1, 3)}
    with pytest.raises(ValueError):
        GenericSweep(heis_xyz, coords, adj, partial, bundle.K, 3, [11])


def test_band_sweep_matches_reference(z2):
    spec = lp_norm(2, "inf")
    seed = 7
    n_max = 6
    R = 10
    bundle, configs = derive_constants(z2, spec, seed, n_max)
    cfgs = [configs[n] for n in sorted(configs)]
    bseq = BoundarySequence(spec, seed)
    seeds = [3, 12]
    sweep = BandSweep(z2, bseq, bundle.K, R, n_max, seeds)
    G = sweep.G
    side = sweep.side
    # the kernel only contracts to cover edges of the word-metric region
    for si, tables in sweep:
        marks = SiteMarks(seeds[si], z2)
        for x1 in range(-R, R + 1):
            for x2 in range(-R, R + 1):
                if abs(x1) + abs(x2) >= R:
                    continue
                for axis in (0, 1):
                    eid = ((x1 + G) * side + (x2 + G)) * 2 + axis
                    ref = resolve_weight(marks, ((x1, x2), axis), cfgs,
                                         n_max, bundle.K)
                    assert tables.w[eid] == ref.weight, ((x1, x2), axis, si)
                    assert tables.n[eid] == ref.winner_level


def test_band_sweep_split_and_chunk_invariance(z2):
    spec = lp_norm(2, "inf")
    bseq = BoundarySequence(spec, 7)
    bundle, _ = derive_constants(z2, spec, 7, 8)
    seeds = [7, 8]

    def snapshot(**kw):
        out = []
        for si, t in BandSweep(z2, bseq, bundle.K, 12, 8, seeds, **kw):
            out.append((t.w.copy(), t.n.copy(), t.z.copy()))
        return out

    base = snapshot()
    for kw in (dict(n_split=1), dict(n_split=8), dict(chunk_cols=5),
               dict(n_split=3, chunk_cols=17)):
        other = snapshot(**kw)
        for (aw, an, az), (bw, bn, bz) in zip(base, other):
            assert np.array_equal(aw, bw)
            assert np.array_equal(an, bn)
            assert np.array_equal(az, bz)


def test_band_sweep_requires_standard_model(heis_xy, z2):
    spec = lp_norm(2, "inf")
    bseq = BoundarySequence(spec, 7)
    with pytest.raises(ValueError):
        BandSweep(heis_xy, bseq, 5.0, 8, 4, [1])
    skew = parse_group("zd:2", generators=((2, 1), (1, 1)))
    with pytest.raises(ValueError):
        BandSweep(skew, bseq, 5.0, 8, 4, [1])


def test_band_census_matches_reference(z2):
    spec = lp_norm(2, "inf")
    seed = 7
    n_max = 5
    bundle, configs = derive_constants(z2, spec, seed, n_max)
    cfgs = [configs[n] for n in sorted(configs)]
    sweep = BandSweep(z2, BoundarySequence(spec, seed), bundle.K, 8, n_max, [seed])
    counts = sweep.claim_counts(seed)
    marks = SiteMarks(seed, z2)
    G, side = sweep.G, sweep.side
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 60:
        x1 = int(rng.integers(-6, 7))
        x2 = int(rng.integers(-6, 7))
        if abs(x1) + abs(x2) >= 8:
            continue
        axis = int(rng.integers(2))
        eid = ((x1 + G) * side + (x2 + G)) * 2 + axis
        assert counts[eid] == competitor_count(marks, ((x1, x2), axis), cfgs, n_max)
        checked += 1


def test_band_grid_eids(z2):
    spec = lp_norm(2, "inf")
    sweep = BandSweep(z2, BoundarySequence(spec, 7), 5.0, 6, 3, [1])
    starts = np.array([[0, 0], [2, -3]], np.int64)
    axes = np.array([0, 1], np.int64)
    eids = sweep.grid_eids(starts, axes)
    G, side = sweep.G, sweep.side
    assert eids[0] == ((0 + G) * side + (0 + G)) * 2 + 0
    assert eids[1] == ((2 + G) * side + (-3 + G)) * 2 + 1
