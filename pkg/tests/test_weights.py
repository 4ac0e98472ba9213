"""Site marks, highway configurations, and edge-weight resolution."""

import collections
import math

import numpy as np
import pytest

from nilfpp.norms import lp_norm
from nilfpp.weights import (
    DictMarks,
    SiteMarks,
    TranslatedMarks,
    build_configuration,
    canonical_edge,
    competition_mean_bound,
    competitor_count,
    derive_constants,
    resolve_weight,
    shell_count_closed_form,
    simple_weight_table,
    truncation_error_bound,
)

LINF = lp_norm(2, "inf")


def test_site_marks_frozen(z2, heis_xy):
    m = SiteMarks(0, z2)
    assert m.y((0, 0)) == 0
    assert m.z_u64((0, 0)) == 0x6D951CAE213B3ACA
    assert m.y((3, -4)) == 0
    m7 = SiteMarks(7, heis_xy)
    assert m7.y((1, 2, 3)) == 2
    assert m7.z_u64((1, 2, 3)) == 0x15EDE1D5AA732884
    assert m7.marks((1, 2, 3))[0] == 2


def test_site_marks_empirical_density(z2):
    marks = SiteMarks(3, z2)
    counts = collections.Counter(
        marks.y((i, j)) for i in range(-40, 41) for j in range(-40, 41))
    n = 81 * 81
    assert abs(counts[0] / n - 0.5) < 0.02
    assert abs(counts[1] / n - 1 / 3) < 0.02
    assert abs(counts[2] / n - 1 / 9) < 0.02


def test_simple_weight_table():
    tab = simple_weight_table(np.array([3.0, 4.0]))
    assert np.allclose(tab, [3 / 25, 4 / 25])
    assert np.allclose(simple_weight_table(np.array([-1.0, 1.0])), [0.5, 0.5])


def test_shell_closed_form_matches_enumeration(z2, heis_xy):
    bundle, configs = derive_constants(z2, LINF, 7, 6)
    for n in (1, 2, 3):
        hc = configs[n]
        assert hc.shell_size == shell_count_closed_form(hc.lattice.m, 2)
    # lifted staircases in the rank-2 nilpotent model stay adjacency-sparse
    bh, ch = derive_constants(heis_xy, lp_norm(2, 2), 7, 4)
    for n in (1, 2, 3):
        hc = ch[n]
        assert hc.shell_size == shell_count_closed_form(hc.lattice.m, 2)


def test_highway_cost_matches_target_norm(z2):
    bundle, _ = derive_constants(z2, LINF, 7, 3)
    axis = build_configuration(4, np.array([1.0, 0.0]), z2, bundle, "simple")
    assert axis.fast_total() == pytest.approx(16.0, abs=1e-12)
    assert LINF.phi(np.array(axis.z, float)) == 16.0
    diag = build_configuration(4, np.array([1.0, 1.0]), z2, bundle, "simple")
    assert diag.fast_total() == pytest.approx(
        LINF.phi(np.array(diag.z, float)), abs=1e-12)
    # irrational direction: agreement up to the lattice rounding error
    b = np.array([1.0, 0.37])
    b /= LINF.phi(b)
    hc = build_configuration(8, b, z2, bundle, "simple")
    assert hc.fast_total() == pytest.approx(
        LINF.phi(np.array(hc.z, float)), rel=0.02)


def test_shell_contains_path_neighborhood(z2):
    bundle, configs = derive_constants(z2, LINF, 7, 3)
    hc = configs[2]
    for v in hc.vertices:
        for i in range(2):
            for s in (1, -1):
                e = canonical_edge(z2, v, i, s)
                w = hc.weight(e)
                assert w is not None and 0 < w <= hc.K
    assert hc.weight(((999, 999), 0)) is None


def test_derive_constants_simple_frozen(z2):
    bundle, _ = derive_constants(z2, LINF, 7, 6)
    assert bundle.K == pytest.approx(1 + 4 * math.sqrt(2))
    assert bundle.C0 == pytest.approx(2 * math.sqrt(2))
    assert bundle.h == 1.0
    assert bundle.shell_c == 6.5


def test_derive_constants_general_frozen(heis_xyz, sdzi):
    bundle, _ = derive_constants(heis_xyz, lp_norm(2, 2), 11, 5)
    assert bundle.mode == "general"
    assert bundle.K == 25.0
    assert bundle.C0p == 3.0
    assert bundle.C == 1
    assert bundle.Mp == 15
    assert bundle.k_lower == pytest.approx(1 / 9)
    assert bundle.shell_c == 8.0

    b2, c2 = derive_constants(sdzi, LINF, 3, 5)
    assert b2.K == 49.0 and b2.C0p == 6.0 and b2.C == 3
    hc = c2[3]
    assert hc.coarse is not None and hc.coarse.segment_count == 5
    for w in hc.fast.values():
        assert 0 < w <= b2.K


def test_derive_constants_rejects_bad_levels(z2):
    with pytest.raises(ValueError):
        derive_constants(z2, LINF, 7, 0)
    with pytest.raises(ValueError):
        derive_constants(z2, LINF, 7, 4, config_levels=[5])


def test_resolve_weight_claims(z2):
    bundle, configs = derive_constants(z2, LINF, 7, 4)
    cfgs = [configs[n] for n in sorted(configs)]
    K = bundle.K

    # nobody claims anything
    inert = DictMarks(z2, {})
    q = resolve_weight(inert, ((0, 0), 0), cfgs, 4, K)
    assert q.weight == K and q.winner_level == 0 and q.winner_site is None

    # the identity seeds a level-2 highway; its first edge gets the table value
    marks = DictMarks(z2, {(0, 0): 2})
    hc = configs[2]
    first_edge = next(iter(sorted(hc.fast)))
    q = resolve_weight(marks, first_edge, cfgs, 4, K)
    assert q.winner_level == 2 and q.winner_site == (0, 0)
    assert q.weight == hc.fast[first_edge]

    # a shell edge that is not fast resolves to K but is still claimed
    shell_only = next(e for e in hc._shell_index if e not in hc.fast)
    q2 = resolve_weight(marks, shell_only, cfgs, 4, K)
    assert q2.winner_level == 2 and q2.weight == K

    # higher level beats lower level on an edge claimed by both sites
    both = DictMarks(z2, {(0, 0): 2, (-1, 0): 3})
    lvl2_edges = set(hc._shell_index)
    shared2 = None
    for (g3, gi3) in configs[3]._shell_index:
        cand = ((g3[0] - 1, g3[1]), gi3)
        if cand in lvl2_edges:
            shared2 = cand
            break
    assert shared2 is not None
    qq = resolve_weight(both, shared2, cfgs, 4, K)
    assert qq.winner_level == 3 and qq.winner_site == (-1, 0)

    # same level: larger Z wins
    tie = DictMarks(z2, {(0, 0): 1, (0, -1): 1}, {(0, 0): 10, (0, -1): 20})
    hc1 = configs[1]
    shared = None
    sh_a = hc1._shell_index
    for (g, gi) in sh_a:
        cand = (z2.mul((0, -1), g), gi)
        if cand in {(z2.mul((0, 0), g2), gi2) for (g2, gi2) in sh_a}:
            shared = cand
            break
    assert shared is not None
    qt = resolve_weight(tie, shared, cfgs, 4, K)
    assert qt.winner_site == (0, -1)

    # n_max filter hides high levels
    high = DictMarks(z2, {(0, 0): 3})
    e3 = next(iter(sorted(configs[3].fast)))
    q3 = resolve_weight(high, e3, cfgs, 2, K)
    assert q3.winner_level == 0 and q3.weight == K

    with pytest.raises(ValueError):
        resolve_weight(inert, ((0, 0), 0), cfgs, 0, K)


def test_resolved_weights_in_range(z2):
    bundle, configs = derive_constants(z2, LINF, 5, 5)
    cfgs = [configs[n] for n in sorted(configs)]
    marks = SiteMarks(5, z2)
    for i in range(-6, 7, 2):
        for j in range(-6, 7, 2):
            for gi in (0, 1):
                q = resolve_weight(marks, ((i, j), gi), cfgs, 5, bundle.K)
                assert 0 < q.weight <= bundle.K


@pytest.mark.parametrize("name,seed", [("zd:2", 5), ("heisenberg:XY", 9),
                                       ("semidirect-zi", 3)])
def test_translation_equivariance(name, seed):
    from nilfpp.groups import parse_group, word_ball

    model = parse_group(name)
    spec = lp_norm(2, 2) if model.default_mode == "simple" else LINF
    bundle, configs = derive_constants(model, spec, seed, 3)
    cfgs = [configs[n] for n in sorted(configs)]
    marks = SiteMarks(seed, model)
    rng = np.random.default_rng(seed)
    ball = list(word_ball(model, 4))
    ngen = len(model.generators)
    for _ in range(1000):
        g = ball[rng.integers(len(ball))]
        u = ball[rng.integers(len(ball))]
        gi = int(rng.integers(ngen))
        base = resolve_weight(marks, (u, gi), cfgs, 3, bundle.K)
        moved = resolve_weight(TranslatedMarks(marks, g),
                               (model.mul(g, u), gi), cfgs, 3, bundle.K)
        assert moved.weight == base.weight
        assert moved.winner_level == base.winner_level
        if base.winner_site is not None:
            assert moved.winner_site == model.mul(g, base.winner_site)


def test_truncation_and_competition_bounds():
    assert truncation_error_bound(4, 6.5) == pytest.approx(
        3 * 6.5 * (2 / 3) ** 5)
    assert competition_mean_bound(3, 6.5) == pytest.approx(
        6.5 * ((2 / 3) + (2 / 3) ** 2 + (2 / 3) ** 3))
    # monotone in n_max, bounded by the geometric tail
    assert competition_mean_bound(30, 6.5) < 6.5 * 2.0


def test_competitor_count_mean_below_bound(z2):
    bundle, configs = derive_constants(z2, LINF, 5, 5)
    cfgs = [configs[n] for n in sorted(configs)]
    marks = SiteMarks(5, z2)
    counts = [competitor_count(marks, ((i, j), gi), cfgs, 5)
              for i in range(-8, 9, 2) for j in range(-8, 9, 2)
              for gi in (0, 1)]
    assert np.mean(counts) <= competition_mean_bound(5, bundle.shell_c)


def test_dict_marks_defaults(z2):
    m = DictMarks(z2, {(1, 1): 4})
    assert m.y((0, 0)) == 0 and m.y((1, 1)) == 4
    assert m.z_u64((2, 2)) == 1
