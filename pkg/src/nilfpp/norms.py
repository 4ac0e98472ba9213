"""Target norms, unit-ball geometry, boundary directions, and the constants.

The norm Phi is given either as an Lp norm or as a symmetric polytope in
facet representation, B = {x : |<a_j, x>| <= 1 for all j}, so evaluation is
an exact max of inner products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import hashing
from .errors import CertificationError, RefusalError
from .groups import GroupModel

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class NormSpec:
    d: int
    kind: str                      # "lp" | "polytope"
    p: Optional[float] = None
    normals: Optional[tuple] = None  # tuple of d-tuples

    def __post_init__(self):
        if self.kind == "lp":
            if self.p is None or self.p < 1:
                raise ValueError("lp norm needs p >= 1 (use inf for the max norm)")
        elif self.kind == "polytope":
            if not self.normals:
                raise ValueError("polytope norm needs at least one facet normal")
            A = np.asarray(self.normals, dtype=float)
            if A.ndim != 2 or A.shape[1] != self.d:
                raise ValueError("facet normals must be d-vectors")
            if np.linalg.matrix_rank(A) < self.d:
                raise ValueError("facet normals must span R^d (ball is unbounded)")
        else:
            raise ValueError(f"unknown norm kind: {self.kind}")

    # -- evaluation ----------------------------------------------------------
    def phi(self, x) -> float:
        v = np.asarray(x, dtype=float)
        if self.kind == "lp":
            if math.isinf(self.p):
                return float(np.max(np.abs(v)))
            return float(np.sum(np.abs(v) ** self.p) ** (1.0 / self.p))
        A = np.asarray(self.normals, dtype=float)
        return float(np.max(np.abs(A @ v)))

    def phi_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "lp":
            if math.isinf(self.p):
                return np.max(np.abs(X), axis=-1)
            return np.sum(np.abs(X) ** self.p, axis=-1) ** (1.0 / self.p)
        A = np.asarray(self.normals, dtype=float)
        return np.max(np.abs(X @ A.T), axis=-1)

    def inscribed_radius(self) -> float:
        """Largest h with the Euclidean h-ball inside the unit ball."""
        if self.kind == "polytope":
            A = np.asarray(self.normals, dtype=float)
            return float(1.0 / np.max(np.linalg.norm(A, axis=1)))
        if math.isinf(self.p) or self.p >= 2:
            return 1.0
        return float(self.d ** (0.5 - 1.0 / self.p))

    # -- serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "lp":
            return {"type": "lp", "p": "inf" if math.isinf(self.p) else self.p}
        return {"type": "polytope", "normals": [list(a) for a in self.normals]}

    @staticmethod
    def from_json(obj: dict, d: int) -> "NormSpec":
        t = obj.get("type")
        if t == "lp":
            p = obj["p"]
            p = math.inf if p in ("inf", "Infinity", None) else float(p)
            return NormSpec(d=d, kind="lp", p=p)
        if t == "polytope":
            normals = tuple(tuple(float(c) for c in a) for a in obj["normals"])
            return NormSpec(d=d, kind="polytope", normals=normals)
        raise ValueError(f"unknown norm spec type: {t!r}")


def lp_norm(d: int, p) -> NormSpec:
    return NormSpec(d=d, kind="lp", p=math.inf if p in ("inf", math.inf) else float(p))


def polytope_norm(d: int, normals) -> NormSpec:
    return NormSpec(d=d, kind="polytope",
                    normals=tuple(tuple(float(c) for c in a) for a in normals))


# ---------------------------------------------------------------------------
# Boundary directions


class BoundarySequence:
    """Deterministic dense sequence b_n on the boundary of the unit ball.

    d = 2 uses golden-angle rotation with a seed-derived phase; d >= 3 draws
    hash-derived Gaussian directions.  Index-addressed and stateless, so
    b(n) is reproducible in isolation.
    """

    GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

    def __init__(self, spec: NormSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        self._offset = hashing.u64_to_unit(
            hashing.finalize(hashing.tag_state(0),
                             hashing.seed_key(self.seed, hashing.STREAM_DIRECTION)))

    def direction(self, n: int) -> np.ndarray:
        """Euclidean unit vector u_n."""
        if n < 1:
            raise ValueError("boundary index starts at 1")
        d = self.spec.d
        if d == 2:
            theta = 2.0 * math.pi * ((n * self.GOLDEN + self._offset) % 1.0)
            return np.array([math.cos(theta), math.sin(theta)])
        for attempt in range(64):
            g = np.empty(d)
            for j in range(d):
                u1 = hashing.u64_to_unit(hashing.site_u64(
                    self.seed, hashing.STREAM_DIRECTION, 0, (n, 2 * j, attempt)))
                u2 = hashing.u64_to_unit(hashing.site_u64(
                    self.seed, hashing.STREAM_DIRECTION, 0, (n, 2 * j + 1, attempt)))
                g[j] = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
            norm = float(np.linalg.norm(g))
            if norm > 1e-12:
                return g / norm
        raise CertificationError("degenerate direction sample")

    def boundary_point(self, n: int) -> np.ndarray:
        u = self.direction(n)
        return u / self.spec.phi(u)


def lattice_target(b: np.ndarray, n: int) -> tuple:
    """Nearest lattice point to 2^n * b/||b||_2, halves rounded toward zero."""
    if n < 0:
        raise ValueError("level must be >= 0")
    b = np.asarray(b, dtype=float)
    v = (2.0 ** n) * b / np.linalg.norm(b)
    z = tuple(int(math.copysign(math.ceil(abs(c) - 0.5), c)) for c in v)
    err = math.sqrt(sum((zi - vi) ** 2 for zi, vi in zip(z, v)))
    if err > math.sqrt(len(z)) / 2 + 1e-9:
        raise CertificationError(f"lattice rounding error {err} out of bounds")
    return z


# ---------------------------------------------------------------------------
# Construction constants


def choose_K(h: float, mode: str, C0: float = 0.0, C0p: float = 0.0,
             max_disp_phi: float = 0.0, max_eta_phi: float = 0.0) -> float:
    """Slow-edge weight: the smallest K satisfying the weight inequalities.

    simple:  1/(K - 2 h^{-1} C0) <= h and K >= h^{-1}
    general: (max ||D(f)^phi|| + max ||eta^phi||) / (K - 8 C0' h^{-1}) <= h
    """
    if h <= 0:
        raise ValueError("inscribed radius must be positive")
    if mode == "simple":
        return max(1.0 / h, (1.0 + 2.0 * C0) / h)
    if mode == "general":
        return 8.0 * C0p / h + (max_disp_phi + max_eta_phi) / h
    raise ValueError(f"unknown mode: {mode}")


@dataclass
class ConstantsBundle:
    mode: str
    h: float
    K: float
    C0: float
    C0p: float = 0.0
    Kp: float = 0.0            # per-edge displacement bound
    C: int = 1                 # quotient word length bound per standard step
    Mp: int = 1                # segmentation window
    k_lower: float = 0.0       # general-mode weight floor
    shell_c: float = 0.0       # |E_n| <= shell_c * 2^n
    max_disp_phi: float = 0.0
    max_eta_phi: float = 0.0
    max_b_norm2: float = 0.0   # largest ||b_n||_2 among directions in use

    def validate(self):
        """Re-substitute every defining inequality; raises on violation."""
        eps = 1e-9
        if self.h <= 0:
            raise CertificationError("nonpositive inscribed radius")
        if self.K < 1.0 / self.h - eps:
            raise CertificationError("K below h^{-1}")
        if self.mode == "simple":
            denom = self.K - 2.0 * self.C0 / self.h
            if denom <= 0 or 1.0 / denom > self.h + eps:
                raise CertificationError("simple-mode weight inequality fails")
        else:
            denom = self.K - 8.0 * self.C0p / self.h
            if denom <= 0 or (self.max_disp_phi + self.max_eta_phi) / denom > self.h + eps:
                raise CertificationError("general-mode weight inequality fails")
            if self.k_lower > 0 and self.C0p > 0 and self.max_b_norm2 > 0:
                expected = 1.0 / (self.C0p ** 2 * self.max_b_norm2)
                if abs(self.k_lower - expected) > eps * max(1.0, expected):
                    raise CertificationError("general-mode weight floor inconsistent")
        return True

    def slack(self) -> float:
        """Additive slack in the membership invariant for this mode."""
        if self.mode == "simple":
            return 2.0 * self.C0 / self.h
        return 8.0 * self.C0p / self.h

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "h": self.h, "K": self.K, "C0": self.C0,
            "C0p": self.C0p, "Kp": self.Kp, "C": self.C, "Mp": self.Mp,
            "k_lower": self.k_lower, "shell_c": self.shell_c,
            "max_disp_phi": self.max_disp_phi, "max_eta_phi": self.max_eta_phi,
            "max_b_norm2": self.max_b_norm2,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ConstantsBundle":
        return ConstantsBundle(**obj)


# ---------------------------------------------------------------------------
# Conjugation invariance


def _test_directions(spec: NormSpec, seed: int, count: int = 1000):
    dirs = []
    if spec.kind == "polytope":
        dirs.extend(np.asarray(a, dtype=float) for a in spec.normals)
    ranges = [np.arange(-3, 4)] * spec.d
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, spec.d)
    dirs.extend(g.astype(float) for g in grid if np.any(g))
    for n in range(count):
        g = np.empty(spec.d)
        for j in range(spec.d):
            u1 = hashing.u64_to_unit(hashing.site_u64(
                seed, hashing.STREAM_SAMPLE, 7, (n, 2 * j)))
            u2 = hashing.u64_to_unit(hashing.site_u64(
                seed, hashing.STREAM_SAMPLE, 7, (n, 2 * j + 1)))
            g[j] = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        if np.linalg.norm(g) > 1e-9:
            dirs.append(g / np.linalg.norm(g))
    return dirs


def check_conjugation_invariance(spec: NormSpec, model: GroupModel,
                                 seed: int = 0, tol: float = 1e-9):
    """None if Phi(v^{phi(q)}) = Phi(v) for all q; else a witness dict.

    Stationary limits inherit the conjugation symmetry, so a target without
    it must be refused up front.
    """
    if spec.d != model.d:
        raise ValueError("norm dimension does not match the model")
    qs = [q for q in model.q_list() if q != 0]
    if not qs:
        return None
    mats = {q: np.asarray(model.phi_mat(q), dtype=float) for q in qs}
    for v in _test_directions(spec, seed):
        pv = spec.phi(v)
        for q in qs:
            pq = spec.phi(mats[q] @ v)
            if abs(pq - pv) > tol * max(1.0, pv):
                return {"q": q, "v": [float(c) for c in v],
                        "phi_v": pv, "phi_v_conj": pq}
    return None


def require_conjugation_invariance(spec: NormSpec, model: GroupModel, seed: int = 0):
    witness = check_conjugation_invariance(spec, model, seed=seed)
    if witness is not None:
        raise RefusalError(
            f"norm is not invariant under the conjugation action of {model.name}: "
            f"Phi(v)={witness['phi_v']:.6g} vs {witness['phi_v_conj']:.6g} "
            f"for v={witness['v']}, q={witness['q']}", witness=witness)


def convex_combination_membership(spec: NormSpec, pairs: Sequence[tuple]):
    """(member, phi_value) for (sum x_i) / (sum alpha_i).

    Given alpha_i >= 0 with each x_i/alpha_i in the unit ball, the combination
    lies in the ball; callers treat a violation as falsifying.
    """
    total_x = np.zeros(spec.d)
    total_a = 0.0
    for x, a in pairs:
        if a < 0:
            raise ValueError("negative coefficient")
        if a > 0 and spec.phi(np.asarray(x, dtype=float) / a) > 1.0 + MEMBERSHIP_TOL:
            raise ValueError("premise violated: x_i/alpha_i outside the ball")
        total_x += np.asarray(x, dtype=float)
        total_a += a
    if total_a == 0.0:
        raise ValueError("all coefficients are zero")
    value = spec.phi(total_x / total_a)
    return value <= 1.0 + MEMBERSHIP_TOL, value
