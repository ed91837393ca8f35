"""Element-wise Gauss rules on tensor-product knot spans."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .knots import KnotVector


@dataclass(frozen=True, eq=False)
class GaussRule:
    """Tensor Gauss-Legendre rule with ``order`` points per span and direction.

    ``points_1d[a]`` / ``weights_1d[a]`` hold the univariate nodes of direction
    ``a`` concatenated over all non-empty spans.  The tensor points are
    ordered with the first direction running fastest.
    """

    points_1d: tuple
    weights_1d: tuple
    order: tuple

    @classmethod
    def for_knots(cls, kvs, order=None) -> "GaussRule":
        """Gauss rule on the span partition of ``kvs``; default ``p + 1`` points per direction."""
        if order is None:
            order = tuple(kv.degree + 1 for kv in kvs)
        elif np.isscalar(order):
            order = (int(order),) * len(kvs)
        pts, wts = [], []
        for kv, q in zip(kvs, order):
            x, w = np.polynomial.legendre.leggauss(q)
            b = kv.breaks
            a0, a1 = b[:-1, None], b[1:, None]
            pts.append(((a1 - a0) * 0.5 * x + (a0 + a1) * 0.5).ravel())
            wts.append(((a1 - a0) * 0.5 * w).ravel())
        return cls(tuple(pts), tuple(wts), tuple(order))

    @classmethod
    def uniform_samples(cls, kvs, per_span: int = 5) -> "GaussRule":
        """Dense diagnostic lattice: ``per_span`` equispaced points inside every span (unit weights)."""
        pts, wts = [], []
        for kv in kvs:
            b = kv.breaks
            f = (np.arange(per_span) + 0.5) / per_span
            x = (b[:-1, None] + (b[1:] - b[:-1])[:, None] * f).ravel()
            pts.append(x)
            wts.append(np.full(x.size, 1.0 / x.size))
        return cls(tuple(pts), tuple(wts), (per_span,) * len(kvs))

    @property
    def sizes(self) -> tuple:
        return tuple(p.size for p in self.points_1d)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.sizes))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.points_1d[::-1], indexing="ij")
        return np.stack([m.ravel() for m in mesh[::-1]], axis=1)

    def weights(self) -> np.ndarray:
        w = self.weights_1d[0]
        for wa in self.weights_1d[1:]:
            w = np.outer(wa, w).ravel()
        return w


def gauss_1d(kv: KnotVector, q: int | None = None):
    r = GaussRule.for_knots((kv,), q)
    return r.points_1d[0], r.weights_1d[0]
