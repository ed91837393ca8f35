"""Open spline curves and closed (periodic) curves with seam bookkeeping.

A closed curve is stored as a clamped curve on ``[0, 1]`` whose first and last
control points coincide.  Moving the parametric seam is only possible through
:func:`split_closed_curve` and :func:`merge_curves`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, GeometryError
from .knots import KnotVector, elevate_coeffs, insert_knot

MERGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SplineCurve:
    """Clamped spline curve over ``kv.domain`` (not necessarily [0, 1])."""

    kv: KnotVector
    ctrl: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        c = np.array(self.ctrl, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.kv.n:
            raise ArgumentError("curve control points must be (n, dim) with n = number of basis functions")
        w = np.ones(c.shape[0]) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (c.shape[0],) or np.any(w <= 0):
            raise ArgumentError("curve weights must be positive")
        c.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "ctrl", c)
        object.__setattr__(self, "weights", w)

    @property
    def degree(self) -> int:
        return self.kv.degree

    @property
    def domain(self):
        return self.kv.domain

    @property
    def start(self) -> np.ndarray:
        return self.ctrl[0]

    @property
    def end(self) -> np.ndarray:
        return self.ctrl[-1]

    def evaluate(self, us) -> np.ndarray:
        us = np.atleast_1d(np.asarray(us, dtype=float))
        for u in (us.min(), us.max()):
            self.kv.check(float(u))
        B = self.kv.basis_matrix(us)
        W = B @ self.weights
        return (B @ (self.ctrl * self.weights[:, None])) / W[:, None]

    def _homogeneous(self):
        return np.hstack([self.ctrl * self.weights[:, None], self.weights[:, None]])

    @staticmethod
    def _from_homogeneous(kv, H):
        w = H[:, -1]
        return SplineCurve(kv, H[:, :-1] / w[:, None], None if np.all(w == 1.0) else w)

    def refined(self, values) -> "SplineCurve":
        kv, H = self.kv, self._homogeneous()
        for u in np.sort(np.atleast_1d(np.asarray(values, dtype=float))):
            kv, H = insert_knot(kv, H, float(u))
        return SplineCurve._from_homogeneous(kv, H)

    def elevated(self, times: int = 1) -> "SplineCurve":
        kv, H = self.kv, self._homogeneous()
        for _ in range(times):
            kv, H = elevate_coeffs(kv, H)
        return SplineCurve._from_homogeneous(kv, H)

    def reparameterized(self, lo: float, hi: float) -> "SplineCurve":
        return SplineCurve(self.kv.scaled(lo, hi), self.ctrl, self.weights)

    def transformed(self, R, shift=None) -> "SplineCurve":
        c = self.ctrl @ np.asarray(R, dtype=float).T
        if shift is not None:
            c = c + shift
        return SplineCurve(self.kv, c, self.weights)


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Closed spline curve over ``s in [0, 1)``.

    ``corners`` are corner parameters in the *material* parameterization and
    ``seam`` is the material parameter currently sitting at ``s = 0``; the
    corners therefore appear at ``(corners - seam) mod 1`` in ``curve``.
    """

    curve: SplineCurve
    corners: tuple = field(default=())
    seam: float = 0.0

    def __post_init__(self):
        if self.curve.domain != (0.0, 1.0):
            raise ArgumentError("closed curves live on [0, 1]")
        if np.linalg.norm(self.curve.start - self.curve.end) > MERGE_TOL:
            raise GeometryError("closed curve does not close: gamma(0) != gamma(1)")
        object.__setattr__(self, "corners", tuple(float(c) for c in self.corners))
        object.__setattr__(self, "seam", float(self.seam) % 1.0)

    @classmethod
    def polygon(cls, vertices, degree: int = 1) -> "ClosedCurve":
        """Closed polyline through ``vertices``; vertex ``j`` sits at ``s = j / n`` and is a corner."""
        v = np.asarray(vertices, dtype=float)
        n = v.shape[0]
        kv = KnotVector.from_breaks(1, np.linspace(0.0, 1.0, n + 1))
        c = SplineCurve(kv, np.vstack([v, v[:1]]))
        if degree > 1:
            c = c.elevated(degree - 1)
        return cls(c, corners=tuple(np.arange(n) / n), seam=0.0)

    @property
    def degree(self) -> int:
        return self.curve.degree

    @property
    def n_corners(self) -> int:
        return len(self.corners)

    def corner_params(self) -> np.ndarray:
        """Corner locations in the current parameter ``s``."""
        return np.sort((np.asarray(self.corners) - self.seam) % 1.0)

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float) % 1.0
        return self.curve.evaluate(s)

    def rotated(self, theta: float, center) -> "ClosedCurve":
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s], [s, c]])
        center = np.asarray(center, dtype=float)
        moved = SplineCurve(self.curve.kv, (self.curve.ctrl - center) @ R.T + center, self.curve.weights)
        return ClosedCurve(moved, self.corners, self.seam)

    def sample(self, n: int) -> np.ndarray:
        return self.curve.evaluate(np.arange(n) / n)


def _split_open(curve: SplineCurve, u: float):
    kv = curve.kv
    p = kv.degree
    lo, hi = kv.domain
    if not (lo < u < hi):
        raise ArgumentError(f"split parameter {u} must lie in ({lo}, {hi})")
    H = curve._homogeneous()
    need = p - kv.multiplicity(u)
    for _ in range(max(need, 0)):
        kv, H = insert_knot(kv, H, u)
    t = kv.knots
    k = int(np.searchsorted(t, u, side="left"))  # first occurrence of u
    i = k - 1                                     # control point at u
    left_kv = KnotVector(p, np.r_[t[:k + p], [u]])
    right_kv = KnotVector(p, np.r_[[u], t[k:]])
    return SplineCurve._from_homogeneous(left_kv, H[: i + 1]), SplineCurve._from_homogeneous(right_kv, H[i:])


def split_closed_curve(c: ClosedCurve, s0: float):
    """Split at ``s0`` into the open pieces over ``[0, s0]`` and ``[s0, 1]``."""
    if not (0.0 < s0 < 1.0):
        raise ArgumentError("split parameter must lie in (0, 1)")
    return _split_open(c.curve, float(s0))


def _join(a: SplineCurve, b: SplineCurve) -> SplineCurve:
    if np.linalg.norm(a.end - b.start) > MERGE_TOL:
        raise GeometryError("curve endpoints do not coincide")
    if a.degree < b.degree:
        a = a.elevated(b.degree - a.degree)
    elif b.degree < a.degree:
        b = b.elevated(a.degree - b.degree)
    p = a.degree
    a_lo, a_hi = a.domain
    b_lo, b_hi = b.domain
    tb = b.kv.knots - b_lo + a_hi
    knots = np.r_[a.kv.knots[:-1], tb[p + 1:]]
    wb = b.weights * (a.weights[-1] / b.weights[0])
    ctrl = np.vstack([a.ctrl, b.ctrl[1:]])
    ctrl[a.ctrl.shape[0] - 1] = a.ctrl[-1]
    w = np.r_[a.weights, wb[1:]]
    return SplineCurve(KnotVector(p, knots), ctrl, None if np.all(w == 1.0) else w)


def merge_curves(a: SplineCurve, b: SplineCurve, corners=(), seam=None) -> ClosedCurve:
    """Join ``a`` then ``b`` into a closed curve on [0, 1].

    ``b`` must start where ``a`` ends and end where ``a`` starts (to 1e-12).
    The seam defaults to ``a``'s parameter start (mod 1).
    """
    if np.linalg.norm(b.end - a.start) > MERGE_TOL:
        raise GeometryError("merged curve would not close")
    joined = _join(a, b).reparameterized(0.0, 1.0)
    # force exact closure so the seam is bit-identical on both ends
    ctrl = joined.ctrl.copy()
    ctrl[-1] = ctrl[0]
    joined = SplineCurve(joined.kv, ctrl, joined.weights)
    if seam is None:
        seam = a.domain[0] % 1.0
    return ClosedCurve(joined, corners, seam)
