"""Bulk realization of the weight field over finite regions.

The per-edge law in weights.resolve_weight is the specification; this module
computes the same tables by sweeping hit sites instead of querying edges.
Two phases keep memory flat: levels up to a split are stamped directly per
seed (hits are dense but paths are short), higher levels are scanned once
for all seeds and the rare hits are kept as compact records.

Every kernel is serial and every stamp update is a commutative idempotent
lex-max, so results are independent of chunk decomposition and identical
across reruns bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from . import hashing
from .errors import ResourceError

U64 = np.uint64
_LP = U64(hashing.LANE_PRIME)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_F1 = U64(0xFF51AFD7ED558CCD)
_F2 = U64(0xC4CEB9FE1A85EC53)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S47 = U64(47)
_S29 = U64(29)

Y_THRESHOLDS_U64 = np.array(hashing.Y_THRESHOLDS, dtype=np.uint64)


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always")
def _fin(st, key):
    h = (st ^ key) * _F1
    h = (h ^ (h >> _S47)) * _F2
    return h ^ (h >> _S29)


@njit(inline="always")
def _lane(st, c):
    return _mix(st ^ (np.uint64(c) * _LP))


@njit(inline="always")
def _gmul(kind, a0, a1, a2, b0, b1, b2):
    """x = a * b, three int64 lanes.  kind: 0 free rank-2, 1 Heisenberg,
    2 the order-4 rotation extension of the Gaussian integers."""
    if kind == 0:
        return a0 + b0, a1 + b1, 0
    if kind == 1:
        return a0 + b0, a1 + b1 + a0 * b2, a2 + b2
    k2 = b0 & 3
    if k2 == 0:
        ra, rb = a1, a2
    elif k2 == 1:
        ra, rb = -a2, a1
    elif k2 == 2:
        ra, rb = -a1, -a2
    else:
        ra, rb = a2, -a1
    return (a0 + b0) & 3, ra + b1, rb + b2


@njit(inline="always")
def _site_state(tagst, ln, x0, x1, x2):
    st = _lane(tagst, x0)
    st = _lane(st, x1)
    if ln == 3:
        st = _lane(st, x2)
    return st


@njit(inline="always")
def _update(eid, n, z, dig, fast, w, tn, tz, tdig, tfast, tw):
    n0 = tn[eid]
    if n < n0:
        return
    if n == n0:
        z0 = tz[eid]
        if z < z0:
            return
        if z == z0:
            d0 = tdig[eid]
            if dig < d0:
                return
            if dig == d0:
                f0 = tfast[eid]
                if fast < f0:
                    return
                if fast == f0:
                    if w > tw[eid]:
                        tw[eid] = w
                    return
    tn[eid] = n
    tz[eid] = z
    tdig[eid] = dig
    tfast[eid] = fast
    tw[eid] = w


# ---------------------------------------------------------------------------
# Word-ball BFS with an open-addressing coordinate index


@njit(inline="always")
def _probe(table, coords, c0, c1, c2, mask):
    """Vertex index if present, else -1 - free_slot."""
    h = _mix(np.uint64(c0) * _LP)
    h = _mix(h ^ (np.uint64(c1) * _LP))
    h = _mix(h ^ (np.uint64(c2) * _LP))
    i = np.int64(h & np.uint64(mask))
    while True:
        v = table[i]
        if v < 0:
            return -1 - i
        if coords[v, 0] == c0 and coords[v, 1] == c1 and coords[v, 2] == c2:
            return np.int64(v)
        i = (i + 1) & mask


@njit(cache=True)
def _ball_bfs(kind, moves, R, cap, hbits):
    size = np.int64(1) << hbits
    mask = size - 1
    table = np.full(size, -1, np.int32)
    coords = np.zeros((cap, 3), np.int64)
    dist = np.zeros(cap, np.int32)
    f = _probe(table, coords, 0, 0, 0, mask)
    table[-1 - f] = 0
    count = 1
    head = 0
    g2 = moves.shape[0]
    while head < count:
        if dist[head] >= R:
            break
        c0 = coords[head, 0]
        c1 = coords[head, 1]
        c2 = coords[head, 2]
        for mi in range(g2):
            x0, x1, x2 = _gmul(kind, c0, c1, c2,
                               moves[mi, 0], moves[mi, 1], moves[mi, 2])
            f = _probe(table, coords, x0, x1, x2, mask)
            if f < 0:
                if count >= cap:
                    return -1, coords, dist, table
                table[-1 - f] = count
                coords[count, 0] = x0
                coords[count, 1] = x1
                coords[count, 2] = x2
                dist[count] = dist[head] + 1
                count += 1
        head += 1
    return count, coords, dist, table


@njit(cache=True)
def _ball_adjacency(kind, coords, count, moves, table, mask):
    g2 = moves.shape[0]
    g = g2 // 2
    adj = np.full((count, g2), -1, np.int32)
    for v in range(count):
        for mi in range(g2):
            x0, x1, x2 = _gmul(kind, coords[v, 0], coords[v, 1], coords[v, 2],
                               moves[mi, 0], moves[mi, 1], moves[mi, 2])
            f = _probe(table, coords, x0, x1, x2, mask)
            if f >= 0:
                # moves are interleaved (+0, -0, +1, -1, ...); adjacency
                # columns are [+0..+g-1 | -0..-g-1]
                col = (mi >> 1) if (mi & 1) == 0 else g + (mi >> 1)
                adj[v, col] = f
    return adj


def _moves_array(model) -> np.ndarray:
    g = len(model.generators)
    moves = np.zeros((2 * g, 3), dtype=np.int64)
    for i in range(g):
        for si, s in enumerate((1, -1)):
            lanes = model.encode_lanes(model.gen(i, s))
            moves[2 * i + si, : len(lanes)] = lanes
    return moves


def build_ball(model, R: int, cap_hint: int = 1 << 13, max_cap: int = 1 << 27):
    """(coords, dist, adj) of the radius-R word ball, BFS discovery order.

    coords is (N, 3) int64 with unused lanes zero; adj is (N, 2g) int32 with
    -1 marking neighbors outside the ball.
    """
    kind = model.numba_kind
    if kind is None:
        raise ValueError(f"{model.name} has no compiled kernel")
    moves = _moves_array(model)
    cap = max(cap_hint, 64)
    while True:
        hbits = max(8, int(math.ceil(math.log2(cap * 2))))
        count, coords, dist, table = _ball_bfs(kind, moves, R, cap, hbits)
        if count >= 0:
            break
        cap *= 4
        if cap > max_cap:
            raise ResourceError(f"word ball at radius {R} exceeds {max_cap} vertices")
    mask = (1 << hbits) - 1
    adj = _ball_adjacency(kind, coords, count, moves, table, mask)
    return coords[:count].copy(), dist[:count].copy(), adj


# ---------------------------------------------------------------------------
# Generic pair kernels: iterate (ball vertex, path index) per level


@njit(inline="always")
def _stamp_vertex(adj, g, y, t, m, so, sslot, rslot, wstep, K,
                  nval, zm, dig, tn, tz, tdig, tfast, tw):
    for slot in range(2 * g):
        nb = adj[y, slot]
        if nb < 0:
            continue
        if slot < g:
            eid = y * g + slot
        else:
            eid = nb * g + (slot - g)
        fast = 0
        w = K
        if t < m and sslot[so + t] == slot:
            fast = 1
            w = wstep[so + t]
        elif t > 0 and rslot[so + t - 1] == slot:
            fast = 1
            w = wstep[so + t - 1]
        _update(eid, nval, zm, dig, fast, w, tn, tz, tdig, tfast, tw)


@njit(cache=True)
def _pairs_records(kind, ln, coords, vinv, tagst, keys, lo, span, nval,
                   rs, rn, rt, ry, count, cap, y0, y1):
    T = vinv.shape[0]
    S = keys.shape[0]
    for t in range(T):
        b0 = vinv[t, 0]
        b1 = vinv[t, 1]
        b2 = vinv[t, 2]
        for y in range(y0, y1):
            x0, x1, x2 = _gmul(kind, coords[y, 0], coords[y, 1], coords[y, 2],
                               b0, b1, b2)
            st = _site_state(tagst, ln, x0, x1, x2)
            for s in range(S):
                h = _fin(st, keys[s])
                if h - lo < span:
                    if count < cap:
                        rs[count] = s
                        rn[count] = nval
                        rt[count] = t
                        ry[count] = y
                    count += 1
    return count


@njit(cache=True)
def _pairs_stamp(kind, ln, coords, adj, g, vinv, so, sslot, rslot, wstep,
                 K, tagst, key_level, key_tie, lo, span, nval,
                 tn, tz, tdig, tfast, tw, y0, y1):
    T = vinv.shape[0]
    m = T - 1
    for t in range(T):
        b0 = vinv[t, 0]
        b1 = vinv[t, 1]
        b2 = vinv[t, 2]
        for y in range(y0, y1):
            x0, x1, x2 = _gmul(kind, coords[y, 0], coords[y, 1], coords[y, 2],
                               b0, b1, b2)
            st = _site_state(tagst, ln, x0, x1, x2)
            h = _fin(st, key_level)
            if h - lo < span:
                zm = _fin(st, key_tie)
                _stamp_vertex(adj, g, y, t, m, so, sslot, rslot, wstep, K,
                              nval, zm, st, tn, tz, tdig, tfast, tw)


@njit(cache=True)
def _pairs_apply(kind, ln, coords, adj, g, voff, vinv_all, soff, sslot, rslot,
                 wstep, K, tagst, key_tie, rs, rn, rt, ry, nrec, sidx,
                 tn, tz, tdig, tfast, tw):
    for r in range(nrec):
        if rs[r] != sidx:
            continue
        n = np.int64(rn[r])
        t = np.int64(rt[r])
        y = np.int64(ry[r])
        vo = voff[n]
        so = soff[n]
        m = (voff[n + 1] - vo) - 1
        x0, x1, x2 = _gmul(kind, coords[y, 0], coords[y, 1], coords[y, 2],
                           vinv_all[vo + t, 0], vinv_all[vo + t, 1],
                           vinv_all[vo + t, 2])
        st = _site_state(tagst, ln, x0, x1, x2)
        zm = _fin(st, key_tie)
        _stamp_vertex(adj, g, y, t, m, so, sslot, rslot, wstep, K,
                      n, zm, st, tn, tz, tdig, tfast, tw)


# ---------------------------------------------------------------------------
# Rank-2 capsule kernels: enumerate hit sites column by column


@njit(inline="always")
def _rnd_i64(num, den):
    if num >= 0:
        return (2 * num + den - 1) // (2 * den)
    return -((-2 * num + den - 1) // (2 * den))


@njit(cache=True)
def _col_bounds(x1, B1, B2, rho):
    """Real x2-range of the capsule around the segment [0, B] at column x1.

    The capsule is the union of two radius-rho disks and the rotated
    rectangle between them; each piece is convex, so the column slice is
    the min/max over the three single intervals.
    """
    lo = 1.0e300
    hi = -1.0e300
    d2 = rho * rho - x1 * x1
    if d2 >= 0.0:
        r = math.sqrt(d2)
        if -r < lo:
            lo = -r
        if r > hi:
            hi = r
    dx = x1 - B1
    d2 = rho * rho - dx * dx
    if d2 >= 0.0:
        r = math.sqrt(d2)
        if B2 - r < lo:
            lo = B2 - r
        if B2 + r > hi:
            hi = B2 + r
    LB = math.sqrt(B1 * B1 + B2 * B2)
    if LB > 0.0:
        n1 = -B2 / LB
        n2 = B1 / LB
        # rectangle points are s*B + r*n with s in [0,1], r in [-rho, rho];
        # the column constraint is s*B1 + r*n1 = x1
        if abs(B1) >= abs(n1):
            # solve s from r; |B1| >= |n1| and LB > 0 force B1 != 0
            ra = -rho
            rb = rho
            if abs(n1) > 1e-300:
                loB = 0.0 if B1 > 0 else B1
                hiB = B1 if B1 > 0 else 0.0
                q1 = (x1 - hiB) / n1
                q2 = (x1 - loB) / n1
                if q1 > q2:
                    q1, q2 = q2, q1
                if q1 > ra:
                    ra = q1
                if q2 < rb:
                    rb = q2
            else:
                s = x1 / B1
                if s < 0.0 or s > 1.0:
                    ra, rb = 1.0, -1.0
            if ra <= rb:
                for k in range(2):
                    r = ra if k == 0 else rb
                    s = (x1 - r * n1) / B1
                    v = s * B2 + r * n2
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
        else:
            # solve r from s; here n1 != 0
            r1 = x1 / n1
            r2 = (x1 - B1) / n1
            s_lo = 0.0
            s_hi = 1.0
            if r2 != r1:
                ta = (-rho - r1) / (r2 - r1)
                tb = (rho - r1) / (r2 - r1)
                if ta > tb:
                    ta, tb = tb, ta
                if ta > s_lo:
                    s_lo = ta
                if tb < s_hi:
                    s_hi = tb
            elif abs(r1) > rho:
                s_lo, s_hi = 1.0, -1.0
            if s_lo <= s_hi:
                for k in range(2):
                    s = s_lo if k == 0 else s_hi
                    r = (x1 - s * B1) / n1
                    v = s * B2 + r * n2
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
    return lo, hi


@njit(inline="always")
def _path_window(a1, a2, u1, u2, thr, m):
    """Integer t-range where |a1 + t*u1| + |a2 + t*u2| <= thr, clipped to [0, m]."""
    sout = abs(u1) + abs(u2)
    if sout <= 0.0:
        if abs(a1) + abs(a2) <= thr:
            return 0, m
        return 1, 0
    nb = 0
    bp0 = 0.0
    bp1 = 0.0
    if u1 != 0.0:
        bp0 = -a1 / u1
        nb = 1
    if u2 != 0.0:
        if nb == 0:
            bp0 = -a2 / u2
        else:
            bp1 = -a2 / u2
        nb += 1
    if nb == 2 and bp1 < bp0:
        bp0, bp1 = bp1, bp0
    g0 = abs(a1 + bp0 * u1) + abs(a2 + bp0 * u2)
    if nb == 1 or bp1 == bp0:
        if g0 > thr:
            return 1, 0
        tl = bp0 - (thr - g0) / sout
        tr = bp0 + (thr - g0) / sout
    else:
        g1 = abs(a1 + bp1 * u1) + abs(a2 + bp1 * u2)
        if g0 > thr and g1 > thr:
            return 1, 0
        smid = (g1 - g0) / (bp1 - bp0)
        if g0 <= thr:
            tl = bp0 - (thr - g0) / sout
        else:
            tl = bp0 + (thr - g0) / smid
        if g1 <= thr:
            tr = bp1 + (thr - g1) / sout
        else:
            tr = bp0 + (thr - g0) / smid
    t0 = np.int64(math.floor(tl)) - 1
    t1 = np.int64(math.ceil(tr)) + 1
    if t0 < 0:
        t0 = 0
    if t1 > m:
        t1 = m
    return t0, t1


@njit(inline="always")
def _ops_edge(x1, x2, axis, fast, w, G, side, oe, of, ow, k):
    if x1 < -G or x1 > G or x2 < -G or x2 > G:
        return k
    oe[k] = (((x1 + G) * side) + (x2 + G)) * 2 + axis
    of[k] = fast
    ow[k] = w
    return k + 1


@njit(inline="always")
def _ops_vertex(v1, v2, K, G, side, oe, of, ow, k):
    k = _ops_edge(v1, v2, 0, 0, K, G, side, oe, of, ow, k)
    k = _ops_edge(v1 - 1, v2, 0, 0, K, G, side, oe, of, ow, k)
    k = _ops_edge(v1, v2, 1, 0, K, G, side, oe, of, ow, k)
    k = _ops_edge(v1, v2 - 1, 1, 0, K, G, side, oe, of, ow, k)
    return k


@njit(cache=True)
def _band_ops(hx1, hx2, z1, z2, m, w1, w2, K, G, side, thr, oe, of, ow):
    """Edge claims of the site at (hx1, hx2): (grid eid, fast flag, weight)."""
    k = 0
    if m == 0:
        return _ops_vertex(hx1, hx2, K, G, side, oe, of, ow, k)
    t0, t1 = _path_window(float(hx1), float(hx2), z1 / m, z2 / m, thr, m)
    if t0 > t1:
        return 0
    p1 = hx1 + _rnd_i64(t0 * z1, m)
    p2 = hx2 + _rnd_i64(t0 * z2, m)
    for t in range(t0, t1 + 1):
        k = _ops_vertex(p1, p2, K, G, side, oe, of, ow, k)
        if t < m:
            q1 = hx1 + _rnd_i64((t + 1) * z1, m)
            q2 = hx2 + _rnd_i64((t + 1) * z2, m)
            d1 = q1 - p1
            d2 = q2 - p2
            c1 = p1
            if d1 != 0:
                s1v = p1 if d1 > 0 else p1 - 1
                k = _ops_edge(s1v, p2, 0, 1, w1, G, side, oe, of, ow, k)
                c1 = p1 + d1
            if d2 != 0:
                if d1 != 0:
                    k = _ops_vertex(c1, p2, K, G, side, oe, of, ow, k)
                s2v = p2 if d2 > 0 else p2 - 1
                k = _ops_edge(c1, s2v, 1, 1, w2, G, side, oe, of, ow, k)
            p1 = q1
            p2 = q2
    return k


@njit(inline="always")
def _band_hit(hx1, hx2, n, zm, dig, z1, z2, m, w1, w2, K, G, side, thr,
              oe, of, ow, tn, tz, tdig, tfast, tw):
    k = _band_ops(hx1, hx2, z1, z2, m, w1, w2, K, G, side, thr, oe, of, ow)
    for i in range(k):
        _update(oe[i], n, zm, dig, of[i], ow[i], tn, tz, tdig, tfast, tw)


@njit(cache=True)
def _band_records(tagst, keys, lo, span, nval, B1, B2, rho, c0, c1,
                  rs, rn, rx1, rx2, count, cap):
    S = keys.shape[0]
    for x1 in range(c0, c1):
        l2, h2 = _col_bounds(float(x1), B1, B2, rho)
        if l2 > h2:
            continue
        a = np.int64(math.floor(l2))
        b = np.int64(math.ceil(h2))
        s1 = _lane(tagst, x1)
        for x2 in range(a, b + 1):
            st = _lane(s1, x2)
            for s in range(S):
                h = _fin(st, keys[s])
                if h - lo < span:
                    if count < cap:
                        rs[count] = s
                        rn[count] = nval
                        rx1[count] = x1
                        rx2[count] = x2
                    count += 1
    return count


@njit(cache=True)
def _band_stamp(tagst, key_level, key_tie, lo, span, nval, B1, B2, rho, c0, c1,
                z1, z2, m, w1, w2, K, G, side, thr, oe, of, ow,
                tn, tz, tdig, tfast, tw):
    for x1 in range(c0, c1):
        l2, h2 = _col_bounds(float(x1), B1, B2, rho)
        if l2 > h2:
            continue
        a = np.int64(math.floor(l2))
        b = np.int64(math.ceil(h2))
        s1 = _lane(tagst, x1)
        for x2 in range(a, b + 1):
            st = _lane(s1, x2)
            h = _fin(st, key_level)
            if h - lo < span:
                zm = _fin(st, key_tie)
                _band_hit(x1, x2, nval, zm, st, z1, z2, m, w1, w2, K, G, side,
                          thr, oe, of, ow, tn, tz, tdig, tfast, tw)


@njit(cache=True)
def _band_apply(rs, rn, rx1, rx2, nrec, sidx, tagst, key_tie,
                z_arr, m_arr, wtab, K, G, side, thr, oe, of, ow,
                tn, tz, tdig, tfast, tw):
    for r in range(nrec):
        if rs[r] != sidx:
            continue
        n = np.int64(rn[r])
        x1 = np.int64(rx1[r])
        x2 = np.int64(rx2[r])
        st = _lane(_lane(tagst, x1), x2)
        zm = _fin(st, key_tie)
        _band_hit(x1, x2, n, zm, st, z_arr[n, 0], z_arr[n, 1], m_arr[n],
                  wtab[n, 0], wtab[n, 1], K, G, side, thr, oe, of, ow,
                  tn, tz, tdig, tfast, tw)


@njit(cache=True)
def _band_census_level(tagst, key_level, lo, span, B1, B2, rho, c0, c1,
                       z1, z2, m, w1, w2, K, G, side, thr, oe, of, ow, counts):
    """Add 1 per (site, edge) claim at one level; duplicates deduped per site."""
    for x1 in range(c0, c1):
        l2, h2 = _col_bounds(float(x1), B1, B2, rho)
        if l2 > h2:
            continue
        a = np.int64(math.floor(l2))
        b = np.int64(math.ceil(h2))
        s1 = _lane(tagst, x1)
        for x2 in range(a, b + 1):
            st = _lane(s1, x2)
            h = _fin(st, key_level)
            if h - lo < span:
                k = _band_ops(x1, x2, z1, z2, m, w1, w2, K, G, side, thr,
                              oe, of, ow)
                if k > 1:
                    oe[:k].sort()
                prev = np.int64(-1)
                for i in range(k):
                    e = oe[i]
                    if e != prev:
                        counts[e] += 1
                        prev = e


# ---------------------------------------------------------------------------
# Orchestration


@dataclass
class StampTables:
    """Per-seed winner tables over an edge-slot space."""

    n: np.ndarray      # uint8 winner level, 0 = unclaimed
    z: np.ndarray      # uint64 winner tie mark
    dig: np.ndarray    # uint64 winner site digest
    fast: np.ndarray   # uint8
    w: np.ndarray      # float64 resolved weight

    @staticmethod
    def allocate(size: int) -> "StampTables":
        return StampTables(np.zeros(size, np.uint8), np.zeros(size, np.uint64),
                           np.zeros(size, np.uint64), np.zeros(size, np.uint8),
                           np.zeros(size, np.float64))

    def clear(self, K: float):
        self.n[:] = 0
        self.z[:] = 0
        self.dig[:] = 0
        self.fast[:] = 0
        self.w[:] = K


def _seed_keys(seeds: Sequence[int], stream: int) -> np.ndarray:
    return np.array([hashing.seed_key(s, stream) for s in seeds], dtype=np.uint64)


def _grow(arrays, new_cap):
    return [np.resize(a, new_cap) for a in arrays]


class GenericSweep:
    """Weight-field sweep over a word ball for models with compiled kernels.

    configs maps level -> HighwayConfiguration; all levels 1..n_max must be
    present.  Yields (seed_index, tables) with tables reused between seeds.
    """

    def __init__(self, model, coords, adj, configs: dict, K: float, n_max: int,
                 seeds: Sequence[int], n_split: Optional[int] = None,
                 chunk: int = 1 << 21, record_budget: int = 192 << 20):
        self.model = model
        self.kind = model.numba_kind
        self.ln = len(model.encode_lanes(model.identity))
        self.coords = coords
        self.adj = adj
        self.g = len(model.generators)
        self.K = float(K)
        self.n_max = int(n_max)
        self.seeds = list(seeds)
        self.chunk = int(chunk)
        self.tagst = np.uint64(hashing.tag_state(model.tag))
        if set(configs) != set(range(1, n_max + 1)):
            raise ValueError("configs must cover levels 1..n_max")
        self._pack_levels(configs)
        N = coords.shape[0]
        if n_split is None:
            n_split = self._choose_split(N, record_budget)
        self.n_split = int(n_split)
        self.tables = StampTables.allocate(N * self.g)
        self._scan_records()

    def _pack_levels(self, configs):
        model = self.model
        g = self.g
        voff = [0]
        soff = [0]
        vrows = []
        sslot = []
        rslot = []
        wstep = []
        self.m_by_level = {}
        for n in range(1, self.n_max + 1):
            hc = configs[n]
            verts = hc.vertices
            m = len(verts) - 1
            self.m_by_level[n] = m
            for v in verts:
                lanes = model.encode_lanes(model.inv(v))
                row = [0, 0, 0]
                row[: len(lanes)] = lanes
                vrows.append(row)
            x = model.identity
            for (gi, s) in hc.path.steps:
                sslot.append(gi if s > 0 else g + gi)
                rslot.append(g + gi if s > 0 else gi)
                e = (x, gi) if s > 0 else (model.mul(x, model.gen(gi, -1)), gi)
                wstep.append(hc.fast[e])
                x = model.mul(x, model.gen(gi, s))
            voff.append(len(vrows))
            soff.append(len(sslot))
        # level index n addresses voff[n-1]..voff[n]; prepend a zero row so
        # voff[n] can be indexed directly by n
        self.voff = np.zeros(self.n_max + 2, np.int64)
        self.soff = np.zeros(self.n_max + 2, np.int64)
        for n in range(1, self.n_max + 1):
            self.voff[n] = voff[n - 1]
            self.soff[n] = soff[n - 1]
        self.voff[self.n_max + 1] = voff[self.n_max]
        self.soff[self.n_max + 1] = soff[self.n_max]
        self.vinv_all = np.array(vrows, dtype=np.int64)
        self.sslot_all = np.array(sslot, dtype=np.int16)
        self.rslot_all = np.array(rslot, dtype=np.int16)
        self.wstep_all = np.array(wstep, dtype=np.float64)

    def _choose_split(self, N, budget_bytes):
        for s in range(1, self.n_max + 1):
            est = sum(N * (self.m_by_level[n] + 1) * 3.0 ** -n
                      for n in range(s + 1, self.n_max + 1)) * len(self.seeds)
            if est * 16 + 4096 <= budget_bytes:
                return s
        return self.n_max

    def _scan_records(self):
        S = len(self.seeds)
        keys = _seed_keys(self.seeds, hashing.STREAM_LEVEL)
        est = sum(self.coords.shape[0] * (self.m_by_level[n] + 1) * 3.0 ** -n
                  for n in range(self.n_split + 1, self.n_max + 1)) * S
        cap = int(est * 1.6) + 65536
        rs = np.zeros(cap, np.uint8)
        rn = np.zeros(cap, np.uint8)
        rt = np.zeros(cap, np.int32)
        ry = np.zeros(cap, np.int32)
        count = 0
        N = self.coords.shape[0]
        for n in range(self.n_split + 1, self.n_max + 1):
            lo, hi = hashing.y_window(n)
            start = count
            vinv = self.vinv_all[self.voff[n]: self.voff[n + 1]]
            while True:
                count = start
                for y0 in range(0, N, self.chunk):
                    y1 = min(N, y0 + self.chunk)
                    count = _pairs_records(
                        self.kind, self.ln, self.coords, vinv, self.tagst,
                        keys, np.uint64(lo), np.uint64(hi - lo), n,
                        rs, rn, rt, ry, count, cap, y0, y1)
                if count <= cap:
                    break
                cap = count + 65536
                rs, rn, rt, ry = _grow([rs, rn, rt, ry], cap)
        self.rec = (rs, rn, rt, ry, count)

    def __iter__(self):
        rs, rn, rt, ry, nrec = self.rec
        N = self.coords.shape[0]
        for si, seed in enumerate(self.seeds):
            key_level = np.uint64(hashing.seed_key(seed, hashing.STREAM_LEVEL))
            key_tie = np.uint64(hashing.seed_key(seed, hashing.STREAM_TIE))
            t = self.tables
            t.clear(self.K)
            for n in range(1, self.n_split + 1):
                lo, hi = hashing.y_window(n)
                vinv = self.vinv_all[self.voff[n]: self.voff[n + 1]]
                so = self.soff[n]
                sslot = self.sslot_all[so: self.soff[n + 1]]
                rslot = self.rslot_all[so: self.soff[n + 1]]
                wstep = self.wstep_all[so: self.soff[n + 1]]
                for y0 in range(0, N, self.chunk):
                    y1 = min(N, y0 + self.chunk)
                    _pairs_stamp(self.kind, self.ln, self.coords, self.adj,
                                 self.g, vinv, 0, sslot, rslot, wstep,
                                 self.K, self.tagst, key_level, key_tie,
                                 np.uint64(lo), np.uint64(hi - lo), n,
                                 t.n, t.z, t.dig, t.fast, t.w, y0, y1)
            if nrec:
                _pairs_apply(self.kind, self.ln, self.coords, self.adj, self.g,
                             self.voff, self.vinv_all, self.soff,
                             self.sslot_all, self.rslot_all, self.wstep_all,
                             self.K, self.tagst, key_tie,
                             rs, rn, rt, ry, nrec, si,
                             t.n, t.z, t.dig, t.fast, t.w)
            yield si, t


class BandSweep:
    """Weight-field sweep for rank-2 free abelian regions at large depth.

    Works on the coordinate grid [-G, G]^2 (G = R + 1) directly, so the level
    cap is bounded by memory of the capsule scan rather than path length.
    Requires the standard generating set.  Yields (seed_index, tables) where
    table slots are grid edges: eid = ((x1+G)*(2G+1) + (x2+G))*2 + axis.
    """

    def __init__(self, model, bseq, K: float, R: int, n_max: int,
                 seeds: Sequence[int], n_split: Optional[int] = None,
                 chunk_cols: int = 1 << 15, record_budget: int = 192 << 20,
                 rho_pad: float = 6.0):
        if model.numba_kind != 0 or model.generators != ((1, 0), (0, 1)):
            raise ValueError("band sweep requires the standard rank-2 model")
        self.model = model
        self.K = float(K)
        self.R = int(R)
        self.G = self.R + 1
        self.side = 2 * self.G + 1
        self.n_max = int(n_max)
        self.seeds = list(seeds)
        self.chunk_cols = int(chunk_cols)
        self.rho = float(R) + rho_pad
        self.thr = float(self.G + 4)
        self.tagst = np.uint64(hashing.tag_state(model.tag))
        # per-level geometry
        self.z_arr = np.zeros((self.n_max + 1, 2), np.int64)
        self.m_arr = np.zeros(self.n_max + 1, np.int64)
        self.wtab = np.zeros((self.n_max + 1, 2), np.float64)
        self.bhat = np.zeros((self.n_max + 1, 2), np.float64)
        from .norms import lattice_target
        from .weights import simple_weight_table
        for n in range(1, self.n_max + 1):
            b = bseq.boundary_point(n)
            z = np.array(lattice_target(b, n), np.int64)
            self.z_arr[n] = z
            self.m_arr[n] = int(np.abs(z).sum())
            self.wtab[n] = simple_weight_table(b)
            self.bhat[n] = b / np.linalg.norm(b)
        if n_split is None:
            n_split = self._choose_split(record_budget)
        self.n_split = int(n_split)
        self.tables = StampTables.allocate(self.side * self.side * 2)
        opcap = 12 * (2 * self.G + 24)
        self._oe = np.zeros(opcap, np.int64)
        self._of = np.zeros(opcap, np.uint8)
        self._ow = np.zeros(opcap, np.float64)
        self._scan_records()

    def _capsule_area(self, n):
        L = 2.0 ** n
        return 2.0 * self.rho * L + math.pi * self.rho ** 2

    def _choose_split(self, budget_bytes):
        for s in range(1, self.n_max + 1):
            est = sum(self._capsule_area(n) * 3.0 ** -n
                      for n in range(s + 1, self.n_max + 1)) * len(self.seeds)
            if est * 16 + 4096 <= budget_bytes:
                return s
        return self.n_max

    def _col_range(self, B1):
        lo = int(math.floor(min(0.0, B1) - self.rho)) - 1
        hi = int(math.ceil(max(0.0, B1) + self.rho)) + 1
        return lo, hi

    def _scan_records(self):
        S = len(self.seeds)
        keys = _seed_keys(self.seeds, hashing.STREAM_LEVEL)
        est = sum(self._capsule_area(n) * 3.0 ** -n
                  for n in range(self.n_split + 1, self.n_max + 1)) * S
        cap = int(est * 1.6) + 65536
        rs = np.zeros(cap, np.uint8)
        rn = np.zeros(cap, np.uint8)
        rx1 = np.zeros(cap, np.int32)
        rx2 = np.zeros(cap, np.int32)
        count = 0
        for n in range(self.n_split + 1, self.n_max + 1):
            lo, hi = hashing.y_window(n)
            B1 = -(2.0 ** n) * self.bhat[n, 0]
            B2 = -(2.0 ** n) * self.bhat[n, 1]
            c0, c1 = self._col_range(B1)
            start = count
            while True:
                count = start
                for ca in range(c0, c1, self.chunk_cols):
                    cb = min(c1, ca + self.chunk_cols)
                    count = _band_records(self.tagst, keys, np.uint64(lo),
                                          np.uint64(hi - lo), n, B1, B2,
                                          self.rho, ca, cb,
                                          rs, rn, rx1, rx2, count, cap)
                if count <= cap:
                    break
                cap = count + 65536
                rs, rn, rx1, rx2 = _grow([rs, rn, rx1, rx2], cap)
        self.rec = (rs, rn, rx1, rx2, count)

    def __iter__(self):
        rs, rn, rx1, rx2, nrec = self.rec
        for si, seed in enumerate(self.seeds):
            key_level = np.uint64(hashing.seed_key(seed, hashing.STREAM_LEVEL))
            key_tie = np.uint64(hashing.seed_key(seed, hashing.STREAM_TIE))
            t = self.tables
            t.clear(self.K)
            for n in range(1, self.n_split + 1):
                lo, hi = hashing.y_window(n)
                B1 = -(2.0 ** n) * self.bhat[n, 0]
                B2 = -(2.0 ** n) * self.bhat[n, 1]
                c0, c1 = self._col_range(B1)
                for ca in range(c0, c1, self.chunk_cols):
                    cb = min(c1, ca + self.chunk_cols)
                    _band_stamp(self.tagst, key_level, key_tie, np.uint64(lo),
                                np.uint64(hi - lo), n, B1, B2, self.rho,
                                ca, cb, self.z_arr[n, 0], self.z_arr[n, 1],
                                self.m_arr[n], self.wtab[n, 0], self.wtab[n, 1],
                                self.K, self.G, self.side, self.thr,
                                self._oe, self._of, self._ow,
                                t.n, t.z, t.dig, t.fast, t.w)
            if nrec:
                _band_apply(rs, rn, rx1, rx2, nrec, si, self.tagst, key_tie,
                            self.z_arr, self.m_arr, self.wtab, self.K,
                            self.G, self.side, self.thr,
                            self._oe, self._of, self._ow,
                            t.n, t.z, t.dig, t.fast, t.w)
            yield si, t

    def claim_counts(self, seed: int, n_hi: Optional[int] = None) -> np.ndarray:
        """Per grid edge: number of sites with Y <= n_hi claiming it (one seed)."""
        n_hi = self.n_max if n_hi is None else int(n_hi)
        counts = np.zeros(self.side * self.side * 2, np.uint32)
        key_level = np.uint64(hashing.seed_key(seed, hashing.STREAM_LEVEL))
        for n in range(1, n_hi + 1):
            lo, hi = hashing.y_window(n)
            B1 = -(2.0 ** n) * self.bhat[n, 0]
            B2 = -(2.0 ** n) * self.bhat[n, 1]
            c0, c1 = self._col_range(B1)
            _band_census_level(self.tagst, key_level, np.uint64(lo),
                               np.uint64(hi - lo), B1, B2, self.rho, c0, c1,
                               self.z_arr[n, 0], self.z_arr[n, 1],
                               self.m_arr[n], self.wtab[n, 0], self.wtab[n, 1],
                               self.K, self.G, self.side, self.thr,
                               self._oe, self._of, self._ow, counts)
        return counts

    def grid_eids(self, start_coords: np.ndarray, axes: np.ndarray) -> np.ndarray:
        """Table slots for canonical edges given start coordinates and axes."""
        G = self.G
        return (((start_coords[:, 0] + G) * self.side
                 + (start_coords[:, 1] + G)) * 2 + axes).astype(np.int64)
