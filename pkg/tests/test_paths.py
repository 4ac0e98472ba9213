"""Staircase construction, lifting, and coarse-path certification."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import model_zoo
from nilfpp.errors import CertificationError
from nilfpp.groups import displacement, dtilde, parse_group
from nilfpp.norms import BoundarySequence, lattice_target, lp_norm
from nilfpp.paths import (
    certify_coarse,
    certify_reversal_fails,
    lift_general,
    lift_path,
    lift_simple,
    loop_erase,
    monotonicity_scan,
    quotient_step_bound,
    quotient_step_words,
    rnd_half_zero,
    segment_coarse,
    segmentation_cap,
    staircase,
)

MODELS = model_zoo()


def test_rnd_half_zero():
    assert rnd_half_zero(1, 2) == 0     # 0.5 -> 0
    assert rnd_half_zero(-1, 2) == 0    # -0.5 -> 0
    assert rnd_half_zero(3, 2) == 1     # 1.5 -> 1
    assert rnd_half_zero(-3, 2) == -1
    assert rnd_half_zero(5, 2) == 2     # 2.5 -> 2
    assert rnd_half_zero(7, 3) == 2
    assert rnd_half_zero(-7, 3) == -2
    assert rnd_half_zero(0, 5) == 0


def test_staircase_basic_certificates():
    b = np.array([3.0, 4.0])
    z = (6, 8)
    p = staircase(z, b)
    assert p.m == 14
    assert len(p.points) == 15
    assert tuple(p.points[-1]) == z
    # unit steps, monotone along signs
    steps = np.diff(p.points, axis=0)
    assert np.all(np.abs(steps).sum(axis=1) == 1)
    assert np.all(steps @ np.array(p.signs) >= 0)
    assert p.deviation <= 2 * math.sqrt(2) + 1e-9
    assert p.min_step_inner > 0


def test_staircase_rejects_sign_mismatch():
    with pytest.raises(ValueError):
        staircase((5, -3), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        # zero-progress axis: b orthogonal to a used coordinate
        staircase((5, 3), np.array([1.0, 0.0]))


def test_staircase_zero_target():
    p = staircase((0, 0), np.array([1.0, 0.0]))
    assert p.m == 0 and len(p.points) == 1


def test_staircase_anchor_formula_matches_points():
    b = np.array([1.0, 2.0, 0.5])
    p = staircase((3, 9, 2), b)
    anchors = p.rounded_point(np.arange(p.m + 1))
    # anchors are a subsequence of the path in order; endpoints match
    assert tuple(anchors[0]) == (0, 0, 0)
    assert tuple(anchors[-1]) == (3, 9, 2)
    pts = {tuple(q) for q in p.points}
    assert all(tuple(a) in pts for a in anchors)


@given(st.integers(-40, 40), st.integers(-40, 40))
@settings(max_examples=80, deadline=None)
def test_staircase_deviation_bound_hypothesis(zx, zy):
    if zx == 0 and zy == 0:
        return
    b = np.array([zx if zx else 0.3, zy if zy else 0.3], dtype=float)
    b /= np.linalg.norm(b)
    p = staircase((zx, zy), b)
    assert p.deviation <= 2 * math.sqrt(2) + 1e-9
    assert p.m == abs(zx) + abs(zy)


def test_staircase_against_boundary_sequence():
    # the production pairing: targets from lattice_target along hash directions
    spec = lp_norm(2, "inf")
    bseq = BoundarySequence(spec, 5)
    for n in range(1, 11):
        bpt = bseq.boundary_point(n)
        z = lattice_target(bpt, n)
        p = staircase(z, bpt)
        assert p.deviation <= 2 * math.sqrt(2) + 1e-9
        assert p.min_step_inner > 0


def test_unmaterialized_staircase_deviation():
    z = (5_000_000, 3_000_000)
    p = staircase(z, np.array([5.0, 3.0]))
    assert p.points is None and not p.deviation_exact
    assert p.deviation <= 2 * math.sqrt(2) + 1e-9


def test_lift_simple_z2(z2):
    p = staircase((3, -2), np.array([1.0, -1.0]))
    ep = lift_simple(p, z2)
    assert ep.end() == (3, -2)
    assert len(ep.steps) == 5


def test_lift_simple_rejects_general_models(sdzi):
    p = staircase((3, 2), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        lift_simple(p, sdzi)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_quotient_step_words_realize_directions(model):
    words = quotient_step_words(model)
    for (axis, sign), steps in words.items():
        ep_disp = (0,) * model.d
        x = model.identity
        for i, s in steps:
            x = model.mul(x, model.gen(i, s))
        q, n = model.project(x)
        assert q == 0
        assert n == tuple(sign if j == axis else 0 for j in range(model.d))
    assert quotient_step_bound(model) >= 1


def test_quotient_step_bound_values(z2, heis_xy, sdzi, oddline):
    assert quotient_step_bound(z2) == 1
    assert quotient_step_bound(heis_xy) == 1
    assert quotient_step_bound(sdzi) <= 4
    assert quotient_step_bound(oddline) == 2  # generator squares to the unit


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_lift_general_displacement(model):
    p = staircase(tuple([4] + [2] * (model.d - 1)),
                  np.ones(model.d) / math.sqrt(model.d))
    ep = lift_general(p, model)
    q, n = dtilde(ep)
    assert q == 0
    assert n == p.z


def test_loop_erase_removes_backtrack(z2):
    from nilfpp.groups import EdgePath

    p = EdgePath(z2, (0, 0), ((0, 1), (1, 1), (1, -1), (0, 1)))
    le = loop_erase(p)
    assert le.end() == p.end()
    assert len(le.steps) == 2
    # already-simple path is untouched
    simple = EdgePath(z2, (0, 0), ((0, 1), (1, 1)))
    assert loop_erase(simple).steps == simple.steps


def test_lift_path_general_is_simple(sdzi):
    p = staircase((5, 3), np.array([5.0, 3.0]))
    ep = lift_path(p, sdzi, "general")
    verts = ep.vertices()
    assert len(set(verts)) == len(verts)
    assert displacement(ep) == (5, 3)


def test_monotonicity_scan_positive():
    b = np.array([2.0, 1.0])
    u = b / np.linalg.norm(b)
    paths = [staircase(lattice_target(b, n), b) for n in range(3, 8)]
    kprime, M = monotonicity_scan(paths, u)
    assert kprime > 0
    assert M >= 1
    # the certified rate must hold on every window of every scanned path
    for p in paths:
        proj = p.points.astype(float) @ u
        for w in range(M, len(proj) - 1):
            assert np.min(proj[w:] - proj[:-w]) >= kprime * w - 1e-9


def test_segmentation_cap_formula():
    cap, mp = segmentation_cap(0.5, 3, 2.0, 2)
    assert mp == max(3, math.ceil((2 * 2.0 * 2 + 1) / 0.5))
    assert cap == 2 * mp * 2


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_coarse_certificates(model):
    b = np.ones(model.d) / math.sqrt(model.d)
    level = 4
    z = lattice_target(b, level)
    p = staircase(z, b)
    ep = lift_path(p, model, "general")
    cap, _ = segmentation_cap(0.4, 4, 4.0, max(1, quotient_step_bound(model)))
    cp = segment_coarse(ep, b, cap, level)
    report = certify_coarse(cp, model)
    assert report["c0p"] >= 1.0
    assert report["endpoint_dev"] <= report["c0p"] + 1e-9
    assert report["perp_dev"] <= report["c0p"] + 1e-9
    assert report["min_progress"] >= 1.0
    assert cp.segment_count == len(cp.progress)
    assert cp.boundaries[0] == 0 and cp.boundaries[-1] == len(ep.steps)
    assert certify_reversal_fails(cp)


def test_segment_coarse_cap_violation(z2):
    from nilfpp.groups import EdgePath

    # a path that oscillates: never gains progress along u
    steps = ((0, 1), (0, -1)) * 10
    ep = EdgePath(z2, (0, 0), steps)
    with pytest.raises(CertificationError):
        segment_coarse(ep, np.array([1.0, 0.0]), cap=4, level=1)


def test_segment_coarse_tail_absorbed(z2):
    from nilfpp.groups import EdgePath

    # 3 units of progress then a 1-step tail short of the next unit
    steps = ((0, 1),) * 3 + ((1, 1),)
    ep = EdgePath(z2, (0, 0), steps)
    cp = segment_coarse(ep, np.array([1.0, 0.0]), cap=10, level=1)
    assert cp.boundaries[-1] == 4
    assert sum(cp.progress) == pytest.approx(3.0)
