"""Keyed counter-style hashing for all randomness in the package.

Every random quantity (site marks, boundary directions, audit walks) is a pure
function of (seed, stream tag, canonical element lanes), so runs are exactly
reproducible and fields can be re-queried point-wise.  The same integer mixer
is implemented three times: scalar Python, vectorized numpy, and inlined in
the numba sweep kernels; tests pin all three to identical outputs.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# Stafford mix13 multipliers and finalizer constants.
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_F1 = 0xFF51AFD7ED558CCD
_F2 = 0xC4CEB9FE1A85EC53

LANE_PRIME = 0x9E3779B97F4A7C15
SEED_PRIME = 0xD1342543DE82EF95
TAG_SALT = 0x243F6A8885A308D3

# Stream tags: one independent field per kind of randomness.
STREAM_LEVEL = 0      # site mark Y (highway level)
STREAM_TIE = 1        # site mark Z (competition tie breaker)
STREAM_DIRECTION = 2  # boundary direction sequence
STREAM_WALK = 3       # audit random walks
STREAM_SAMPLE = 4     # miscellaneous sampling

_STREAM_SALTS = {
    STREAM_LEVEL: 0x452821E638D01377,
    STREAM_TIE: 0xBE5466CF34E90C6C,
    STREAM_DIRECTION: 0xC0AC29B7C97C50DD,
    STREAM_WALK: 0x3F84D5B5B5470917,
    STREAM_SAMPLE: 0x9216D5D98979FB1B,
}


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def seed_key(seed: int, stream: int) -> int:
    """Per-(seed, stream) finalization key, absorbed after the element lanes."""
    return mix64(mix64((seed & MASK64) * SEED_PRIME) ^ _STREAM_SALTS[stream])


def tag_state(model_tag: int) -> int:
    """Initial lane state for a model; coordinate lanes are absorbed onto it."""
    return mix64(TAG_SALT ^ ((model_tag & MASK64) * LANE_PRIME))


def absorb(state: int, lane: int) -> int:
    return mix64(state ^ ((lane & MASK64) * LANE_PRIME))


def finalize(state: int, key: int) -> int:
    h = ((state ^ key) * _F1) & MASK64
    h = ((h ^ (h >> 47)) * _F2) & MASK64
    return h ^ (h >> 29)


def site_u64(seed: int, stream: int, model_tag: int, coords) -> int:
    """Hash of one element: lanes are the 8-byte words of its canonical encoding."""
    state = tag_state(model_tag)
    for c in coords:
        state = absorb(state, int(c))
    return finalize(state, seed_key(seed, stream))


def site_digest(model_tag: int, coords) -> int:
    """Seed-independent 64-bit digest of an element, used as a total-order
    tie breaker; equals the lane state before per-seed finalization."""
    state = tag_state(model_tag)
    for c in coords:
        state = absorb(state, int(c))
    return state


def u64_to_unit(u: int) -> float:
    """Uniform in [0, 1) from the top 53 bits."""
    return (u >> 11) * (2.0 ** -53)


# ---------------------------------------------------------------------------
# numpy vector forms (identical bit-for-bit to the scalar forms)

_U = np.uint64


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(_M1)
    z = (z ^ (z >> _U(27))) * _U(_M2)
    return z ^ (z >> _U(31))


def absorb_np(state: np.ndarray, lane: np.ndarray) -> np.ndarray:
    return mix64_np(state ^ (lane.astype(np.uint64) * _U(LANE_PRIME)))


def finalize_np(state: np.ndarray, key: int) -> np.ndarray:
    h = (state ^ _U(key)) * _U(_F1)
    h = (h ^ (h >> _U(47))) * _U(_F2)
    return h ^ (h >> _U(29))


def site_u64_np(seed: int, stream: int, model_tag: int, coord_cols) -> np.ndarray:
    """Vector hash; coord_cols is a sequence of integer arrays (one per lane)."""
    n = len(coord_cols[0]) if coord_cols else 0
    state = np.full(n, tag_state(model_tag), dtype=np.uint64)
    for col in coord_cols:
        col = np.asarray(col)
        if col.dtype != np.uint64:
            col = col.astype(np.int64).view(np.uint64)
        state = absorb_np(state, col)
    return finalize_np(state, seed_key(seed, stream))


# ---------------------------------------------------------------------------
# The highway-level mark Y: P(Y=0)=1/2, P(Y=n)=3^-n for n>=1.

Y_CAP = 40

def _thresholds() -> list[int]:
    # t_n = floor((1 - 3^-n/2) * 2^64); Y = n iff t_{n-1} <= u < t_n (t_0 = 2^63).
    out = [1 << 63]
    for n in range(1, Y_CAP + 1):
        d = 2 * 3 ** n
        out.append(((d - 1) << 64) // d)
    return out

Y_THRESHOLDS = _thresholds()


def y_window(n: int) -> tuple[int, int]:
    """[lo, hi) window of u64 values mapping to Y == n (n >= 1)."""
    if not 1 <= n <= Y_CAP:
        raise ValueError(f"level out of range: {n}")
    return Y_THRESHOLDS[n - 1], Y_THRESHOLDS[n]


def y_from_u64(u: int) -> int:
    if u < Y_THRESHOLDS[0]:
        return 0
    for n in range(1, Y_CAP + 1):
        if u < Y_THRESHOLDS[n]:
            return n
    return Y_CAP


def y_from_unit(u: float) -> int:
    """Inverse CDF on a unit uniform; the u64 path is the production one."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    if u < 0.5:
        return 0
    n = 1
    while u >= 1.0 - 0.5 * 3.0 ** -n and n < Y_CAP:
        n += 1
    return n


def y_from_u64_np(u: np.ndarray) -> np.ndarray:
    thr = np.array(Y_THRESHOLDS, dtype=np.uint64)
    lev = np.searchsorted(thr, u, side="right").astype(np.int64)
    return np.minimum(lev, Y_CAP)
