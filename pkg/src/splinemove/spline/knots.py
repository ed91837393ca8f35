"""Open knot vectors and univariate B-spline basis evaluation.

The algorithms follow the classical span-local formulation of the Cox-de Boor
recursion: only the ``p + 1`` functions that are non-zero on a knot span are
ever evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import ArgumentError, DomainError

# knots closer than this are considered equal when deduplicating breakpoints
KNOT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open (clamped) knot vector of degree ``degree``.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p >= 0``.
    knots : array_like
        Non-decreasing sequence of length ``n + p + 1`` whose first and last
        entries are repeated ``p + 1`` times.
    """

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        p = int(self.degree)
        t = np.array(self.knots, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "knots", t)
        if p < 0:
            raise ArgumentError("degree must be non-negative")
        if t.ndim != 1 or t.size < 2 * (p + 1):
            raise ArgumentError("knot vector needs at least 2(p+1) entries")
        if np.any(np.diff(t) < 0):
            raise ArgumentError("knots must be non-decreasing")
        if np.any(t[: p + 1] != t[0]) or np.any(t[-p - 1:] != t[-1]):
            raise ArgumentError("knot vector must be open (end knots repeated p+1 times)")
        if not t[-1] > t[0]:
            raise ArgumentError("knot vector spans an empty interval")
        interior = t[p + 1: t.size - p - 1]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > max(p, 1):
                raise ArgumentError("interior knot multiplicity exceeds the degree")

    # -- construction helpers -------------------------------------------------
    @classmethod
    def uniform(cls, degree: int, n_elements: int, lo: float = 0.0, hi: float = 1.0) -> "KnotVector":
        inner = np.linspace(lo, hi, n_elements + 1)[1:-1]
        return cls(degree, np.r_[[lo] * (degree + 1), inner, [hi] * (degree + 1)])

    @classmethod
    def from_breaks(cls, degree: int, breaks, multiplicity: int | None = None) -> "KnotVector":
        """Open knot vector with the given breakpoints, interior multiplicity ``multiplicity`` (default 1)."""
        breaks = np.asarray(breaks, dtype=float)
        m = 1 if multiplicity is None else multiplicity
        inner = np.repeat(breaks[1:-1], m)
        return cls(degree, np.r_[[breaks[0]] * (degree + 1), inner, [breaks[-1]] * (degree + 1)])

    # -- basic properties -----------------------------------------------------
    @property
    def p(self) -> int:
        return self.degree

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @cached_property
    def key(self) -> tuple:
        return (self.degree, self.knots.tobytes())

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"KnotVector(p={self.degree}, knots={np.array2string(self.knots, precision=6)})"

    @cached_property
    def breaks(self) -> np.ndarray:
        """Distinct knot values (element boundaries)."""
        t = self.knots
        keep = np.r_[True, np.diff(t) > KNOT_TOL]
        return t[keep]

    @cached_property
    def spans(self) -> np.ndarray:
        """Indices ``k`` of the non-empty spans ``[t_k, t_{k+1})``."""
        t = self.knots
        idx = np.nonzero(np.diff(t) > 0)[0]
        return idx

    @property
    def n_elements(self) -> int:
        return int(self.spans.size)

    def multiplicity(self, u: float) -> int:
        return int(np.count_nonzero(self.knots == u))

    def greville(self) -> np.ndarray:
        """Greville abscissae (knot averages) of all basis functions."""
        p, t = self.degree, self.knots
        if p == 0:
            return 0.5 * (t[:-1] + t[1:])
        return np.array([t[i + 1: i + p + 1].mean() for i in range(self.n)])

    # -- derived knot vectors -------------------------------------------------
    def inserted(self, values) -> "KnotVector":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return KnotVector(self.degree, np.sort(np.r_[self.knots, values]))

    def midpoints(self) -> np.ndarray:
        b = self.breaks
        return 0.5 * (b[:-1] + b[1:])

    def elevated(self) -> "KnotVector":
        """Knot vector of the degree-elevated space (every distinct knot gains one multiplicity)."""
        return KnotVector(self.degree + 1, np.sort(np.r_[self.knots, self.breaks]))

    def scaled(self, lo: float = 0.0, hi: float = 1.0) -> "KnotVector":
        a, b = self.domain
        t = lo + (self.knots - a) * ((hi - lo) / (b - a))
        t[: self.degree + 1] = lo
        t[-self.degree - 1:] = hi
        return KnotVector(self.degree, t)

    def check(self, u: float) -> None:
        a, b = self.domain
        if not (a <= u <= b) or not np.isfinite(u):
            raise DomainError(f"parameter {u!r} outside knot range [{a}, {b}]")

    # -- sampling ---------------------------------------------------------------
    def basis_matrix(self, us, der: int = 0) -> sp.csr_matrix:
        """Sparse collocation matrix ``M[a, i] = d^der B_i(us[a])``."""
        us = np.asarray(us, dtype=float)
        p = self.degree
        rows = np.repeat(np.arange(us.size), p + 1)
        cols = np.empty(us.size * (p + 1), dtype=int)
        vals = np.empty(us.size * (p + 1))
        for a, u in enumerate(us):
            span = find_span(self, u)
            cols[a * (p + 1):(a + 1) * (p + 1)] = np.arange(span - p, span + 1)
            if der == 0:
                vals[a * (p + 1):(a + 1) * (p + 1)] = eval_basis(self, span, u)
            else:
                vals[a * (p + 1):(a + 1) * (p + 1)] = eval_basis_ders(self, span, u, der)[der]
        return sp.csr_matrix((vals, (rows, cols)), shape=(us.size, self.n))


def find_span(kv: KnotVector, u: float) -> int:
    """Index ``k`` with ``t_k <= u < t_{k+1}``; ``u`` equal to the last knot maps to the last non-empty span."""
    kv.check(u)
    t, p, n = kv.knots, kv.degree, kv.n
    if u >= t[n]:
        return n - 1
    # side="right" gives the first index with t > u
    return int(np.searchsorted(t, u, side="right") - 1)


def eval_basis(kv: KnotVector, span: int, u: float) -> np.ndarray:
    """Values of the ``p + 1`` basis functions that are non-zero on ``span``."""
    p, t = kv.degree, kv.knots
    N = np.zeros(p + 1)
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    N[0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - t[span + 1 - j]
        right[j] = t[span + j] - u
        saved = 0.0
        for r in range(j):
            tmp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        N[j] = saved
    return N


def eval_basis_ders(kv: KnotVector, span: int, u: float, k: int) -> np.ndarray:
    """Table ``D[j, r]``: ``j``-th derivative of the ``r``-th non-zero basis function, ``j <= k``."""
    p, t = kv.degree, kv.knots
    if k > p or k < 0:
        raise ArgumentError(f"derivative order {k} must lie in [0, p={p}]")
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - t[span + 1 - j]
        right[j] = t[span + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            tmp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        ndu[j, j] = saved
    ders = np.zeros((k + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for kk in range(1, k + 1):
            d = 0.0
            rk, pk = r - kk, p - kk
            if r >= kk:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = kk - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, kk] = -a[s1, kk - 1] / ndu[pk + 1, r]
                d += a[s2, kk] * ndu[r, pk]
            ders[kk, r] = d
            s1, s2 = s2, s1
    fac = p
    for kk in range(1, k + 1):
        ders[kk] *= fac
        fac *= p - kk
    return ders


def insert_knot(kv: KnotVector, coeffs: np.ndarray, u: float, times: int = 1):
    """Boehm knot insertion along axis 0 of ``coeffs`` (homogeneous coordinates for NURBS)."""
    lo, hi = kv.domain
    if not (lo < u < hi):
        raise ArgumentError(f"inserted knot {u!r} must be interior to ({lo}, {hi})")
    P = np.asarray(coeffs, dtype=float)
    for _ in range(times):
        p, t = kv.degree, kv.knots
        if kv.multiplicity(u) >= p:
            raise ArgumentError(f"knot {u!r} already has full multiplicity")
        k = find_span(kv, u)
        Q = np.empty((P.shape[0] + 1,) + P.shape[1:])
        Q[: k - p + 1] = P[: k - p + 1]
        Q[k + 1:] = P[k:]
        for i in range(k - p + 1, k + 1):
            alpha = (u - t[i]) / (t[i + p] - t[i])
            Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1]
        P = Q
        kv = kv.inserted(u)
    return kv, P


def refine_coeffs(kv: KnotVector, coeffs: np.ndarray, values):
    """Insert every knot in ``values`` (repeats allowed)."""
    for u in np.sort(np.atleast_1d(values)):
        kv, coeffs = insert_knot(kv, coeffs, float(u))
    return kv, coeffs


def elevate_coeffs(kv: KnotVector, coeffs: np.ndarray):
    """Raise the degree by one along axis 0.

    The elevated space contains the original one, so interpolation at the
    Greville abscissae of the new space reproduces the spline exactly (up to
    the conditioning of the collocation matrix).
    """
    new = kv.elevated()
    g = new.greville()
    lo, hi = new.domain
    g = np.clip(g, lo, hi)
    old_vals = kv.basis_matrix(g) @ np.asarray(coeffs, dtype=float).reshape(kv.n, -1)
    A = new.basis_matrix(g).toarray()
    P = np.linalg.solve(A, old_vals)
    return new, P.reshape((new.n,) + np.shape(coeffs)[1:])


def merge_knot_vectors(a: KnotVector, b: KnotVector) -> KnotVector:
    """Smallest common refinement of two knot vectors of equal degree and domain."""
    if a.degree != b.degree or a.domain != b.domain:
        raise ArgumentError("knot vectors must share degree and domain to be merged")
    vals = np.union1d(a.knots, b.knots)
    # values that differ only by round-off are one knot
    vals = vals[np.r_[True, np.diff(vals) > 1e-12]]
    out = []
    for v in vals:
        ma = np.count_nonzero(np.abs(a.knots - v) <= 1e-12)
        mb = np.count_nonzero(np.abs(b.knots - v) <= 1e-12)
        out.extend([v] * max(ma, mb))
    return KnotVector(a.degree, np.array(out))


def snap_knots(kv: KnotVector, target: KnotVector) -> KnotVector:
    """Replace knots of ``kv`` that match a knot of ``target`` to 1e-12 by the exact target value."""
    t = kv.knots.copy()
    for v in np.unique(target.knots):
        t[np.abs(t - v) <= 1e-12] = v
    return KnotVector(kv.degree, t)


def missing_knots(coarse: KnotVector, fine: KnotVector) -> np.ndarray:
    """Knots that must be inserted into ``coarse`` to obtain ``fine``."""
    out = []
    for v in np.unique(fine.knots):
        extra = fine.multiplicity(v) - coarse.multiplicity(v)
        if extra < 0:
            raise ArgumentError("target knot vector is not a refinement")
        out.extend([v] * extra)
    return np.array(out)
