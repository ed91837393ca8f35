"""Tensor-product B-spline / NURBS patches over the unit parametric cube."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import scipy.sparse as sp

from ..errors import ArgumentError, DomainError
from .knots import (
    KnotVector,
    elevate_coeffs,
    eval_basis,
    eval_basis_ders,
    find_span,
    insert_knot,
)

# side = (axis, end): end 0 is xi_axis = 0, end 1 is xi_axis = 1
SIDES = {"west": (0, 0), "east": (0, 1), "south": (1, 0), "north": (1, 1), "front": (2, 0), "back": (2, 1)}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TensorPatch:
    """Tensor-product spline map ``F: [0,1]^d -> R^dim``.

    Control points are stored flat in lexicographic order with ``xi_1``
    running fastest, i.e. index ``i_1 + n_1 * (i_2 + n_2 * i_3)``.
    """

    kvs: tuple
    ctrl: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        kvs = tuple(self.kvs)
        object.__setattr__(self, "kvs", kvs)
        ctrl = _frozen(self.ctrl)
        if ctrl.ndim != 2:
            raise ArgumentError("control points must be an (N, dim) array")
        n = int(np.prod([kv.n for kv in kvs]))
        if ctrl.shape[0] != n:
            raise ArgumentError(f"control net has {ctrl.shape[0]} points, basis has {n}")
        for kv in kvs:
            if kv.domain != (0.0, 1.0):
                raise ArgumentError("patch knot vectors must span [0, 1]")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ArgumentError("weights must be positive, one per control point")
        object.__setattr__(self, "ctrl", ctrl)
        object.__setattr__(self, "weights", _frozen(w))

    # -- layout -------------------------------------------------------------------
    @classmethod
    def from_grid(cls, kvs, grid, weights=None) -> "TensorPatch":
        """Build from control points indexed ``grid[i_1, i_2, ..., :]``."""
        grid = np.asarray(grid, dtype=float)
        d = len(kvs)
        dim = grid.shape[-1]
        flat = grid.transpose(tuple(range(d))[::-1] + (d,)).reshape(-1, dim)
        w = None
        if weights is not None:
            w = np.asarray(weights, dtype=float).transpose(tuple(range(d))[::-1]).ravel()
        return cls(tuple(kvs), flat, w)

    @property
    def pdim(self) -> int:
        return len(self.kvs)

    @property
    def dim(self) -> int:
        return self.ctrl.shape[1]

    @property
    def shape(self) -> tuple:
        return tuple(kv.n for kv in self.kvs)

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.kvs)

    @property
    def is_rational(self) -> bool:
        return bool(np.any(self.weights != 1.0))

    @property
    def n_elements(self) -> int:
        return int(np.prod([kv.n_elements for kv in self.kvs]))

    def grid(self) -> np.ndarray:
        d = self.pdim
        g = self.ctrl.reshape(self.shape[::-1] + (self.dim,))
        return g.transpose(tuple(range(d))[::-1] + (d,))

    def weight_grid(self) -> np.ndarray:
        d = self.pdim
        return self.weights.reshape(self.shape[::-1]).transpose(tuple(range(d))[::-1])

    def flat_index(self, multi) -> int:
        idx, stride = 0, 1
        for i, n in zip(multi, self.shape):
            idx += int(i) * stride
            stride *= n
        return idx

    def index_grid(self) -> np.ndarray:
        """``index_grid()[i_1, i_2, ...]`` is the flat control index."""
        d = self.pdim
        return np.arange(self.ctrl.shape[0]).reshape(self.shape[::-1]).transpose(tuple(range(d))[::-1])

    def face_indices(self, side) -> np.ndarray:
        """Flat control indices on a boundary face, ordered by the remaining axes (lowest axis fastest)."""
        axis, end = SIDES[side] if isinstance(side, str) else side
        g = self.index_grid()
        face = np.take(g, 0 if end == 0 else self.shape[axis] - 1, axis=axis)
        return face.transpose(tuple(range(face.ndim))[::-1]).ravel()

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        g = self.index_grid()
        mask = np.zeros(g.shape, dtype=bool)
        for a in range(self.pdim):
            sl = [slice(None)] * self.pdim
            sl[a] = 0
            mask[tuple(sl)] = True
            sl[a] = -1
            mask[tuple(sl)] = True
        return np.sort(g[mask])

    @cached_property
    def interior_indices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.ctrl.shape[0]), self.boundary_indices)

    def with_ctrl(self, ctrl) -> "TensorPatch":
        return TensorPatch(self.kvs, ctrl, self.weights)

    # -- evaluation ---------------------------------------------------------------
    def _local(self, xi, nder):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.pdim,):
            raise ArgumentError(f"expected a parametric point of length {self.pdim}")
        spans, tables = [], []
        for kv, u in zip(self.kvs, xi):
            if not (0.0 <= u <= 1.0):
                raise DomainError(f"parametric point {tuple(xi)} outside [0,1]^{self.pdim}")
            s = find_span(kv, u)
            spans.append(s)
            tables.append(eval_basis_ders(kv, s, u, min(nder, kv.degree)) if nder else eval_basis(kv, s, u)[None])
        idx = self.index_grid()[tuple(np.ix_(*[np.arange(s - kv.degree, s + 1) for s, kv in zip(spans, self.kvs)]))]
        return idx, tables

    def eval_with_derivs(self, xi):
        """Return ``(x, J)`` at ``xi``: the point and the ``dim x pdim`` Jacobian."""
        idx, tabs = self._local(xi, 1)
        d = self.pdim
        P = self.ctrl[idx]           # (p1+1, ..., dim)
        w = self.weights[idx]

        def contract(orders):
            mats = [tabs[a][orders[a]] if orders[a] < tabs[a].shape[0] else np.zeros(tabs[a].shape[1]) for a in range(d)]
            B = reduce(np.multiply.outer, mats)
            Bw = B * w
            return np.tensordot(Bw, P, axes=d), Bw.sum()

        A, W = contract((0,) * d)
        x = A / W
        J = np.empty((self.dim, d))
        for a in range(d):
            orders = [0] * d
            orders[a] = 1
            dA, dW = contract(orders)
            J[:, a] = (dA - x * dW) / W
        return x, J

    # -- tabulation on tensor grids ---------------------------------------------
    def tabulate(self, points_1d, derivatives: bool = True):
        """Rational basis (and first derivatives) on the tensor grid of ``points_1d``.

        Returns ``R`` and a list ``[R_1, ..., R_d]`` of sparse ``(n_points, N)``
        matrices, points ordered with the first direction fastest.
        """
        d = self.pdim
        vals = [kv.basis_matrix(u) for kv, u in zip(self.kvs, points_1d)]
        ders = [kv.basis_matrix(u, 1) if kv.degree > 0 else sp.csr_matrix((len(u), kv.n)) for kv, u in zip(self.kvs, points_1d)] if derivatives else None

        def kron_all(factors):
            # factors listed per direction; first direction must run fastest
            return reduce(lambda acc, f: sp.kron(f, acc, format="csr"), factors[1:], factors[0])

        B = kron_all(vals)
        if not derivatives:
            if not self.is_rational:
                return B
            W = B @ self.weights
            return sp.diags(1.0 / W) @ B @ sp.diags(self.weights)
        D = []
        for a in range(d):
            f = list(vals)
            f[a] = ders[a]
            D.append(kron_all(f))
        if not self.is_rational:
            return B, D
        wd = sp.diags(self.weights)
        W = B @ self.weights
        Bw = (B @ wd).tocsr()
        R = (sp.diags(1.0 / W) @ Bw).tocsr()
        RD = []
        for Da in D:
            dW = Da @ self.weights
            RD.append((sp.diags(1.0 / W) @ Da @ wd - sp.diags(dW / W**2) @ Bw).tocsr())
        return R, RD

    # -- refinement -----------------------------------------------------------------
    def _homogeneous_grid(self):
        g = self.grid()
        w = self.weight_grid()[..., None]
        return np.concatenate([g * w, w], axis=-1)

    @classmethod
    def _from_homogeneous(cls, kvs, H):
        w = H[..., -1]
        return cls.from_grid(kvs, H[..., :-1] / w[..., None], None if np.all(w == 1.0) else w)

    def refined(self, axis: int, values) -> "TensorPatch":
        H = np.moveaxis(self._homogeneous_grid(), axis, 0)
        kv = self.kvs[axis]
        for u in np.sort(np.atleast_1d(np.asarray(values, dtype=float))):
            kv, H = insert_knot(kv, H, float(u))
        kvs = list(self.kvs)
        kvs[axis] = kv
        return TensorPatch._from_homogeneous(tuple(kvs), np.moveaxis(H, 0, axis))

    def elevated(self, axis: int) -> "TensorPatch":
        H = np.moveaxis(self._homogeneous_grid(), axis, 0)
        kv, H = elevate_coeffs(self.kvs[axis], H)
        kvs = list(self.kvs)
        kvs[axis] = kv
        return TensorPatch._from_homogeneous(tuple(kvs), np.moveaxis(H, 0, axis))

    def translated(self, shift) -> "TensorPatch":
        return self.with_ctrl(self.ctrl + np.asarray(shift, dtype=float))


def patch_eval(patch: TensorPatch, xi) -> np.ndarray:
    """Physical point ``F(xi)``."""
    idx, tabs = patch._local(xi, 0)
    d = patch.pdim
    B = reduce(np.multiply.outer, [t[0] for t in tabs]) * patch.weights[idx]
    return np.tensordot(B, patch.ctrl[idx], axes=d) / B.sum()


def patch_jacobian(patch: TensorPatch, xi) -> np.ndarray:
    """Jacobian matrix; column ``a`` is ``dF/dxi_a``."""
    return patch.eval_with_derivs(xi)[1]


def h_refine(patch: TensorPatch, knots_to_insert) -> TensorPatch:
    """Insert knots per direction: ``knots_to_insert[a]`` is a sequence for axis ``a``."""
    if len(knots_to_insert) != patch.pdim:
        raise ArgumentError("need one knot list per parametric direction")
    out = patch
    for a, vals in enumerate(knots_to_insert):
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        if vals.size:
            if np.any(vals <= 0.0) or np.any(vals >= 1.0):
                raise ArgumentError("inserted knots must be interior to (0, 1)")
            out = out.refined(a, vals)
    return out


def uniform_refine(patch: TensorPatch, times: int = 1) -> TensorPatch:
    """Bisect every knot span ``times`` times in every direction."""
    out = patch
    for _ in range(times):
        out = h_refine(out, [kv.midpoints() for kv in out.kvs])
    return out


def degree_elevate(patch: TensorPatch, times: int = 1, axes=None) -> TensorPatch:
    out = patch
    axes = range(patch.pdim) if axes is None else axes
    for _ in range(times):
        for a in axes:
            out = out.elevated(a)
    return out


def identity_patch(degrees=(2, 2), elements=(1, 1), lo=(0.0, 0.0), hi=(1.0, 1.0)) -> TensorPatch:
    """Patch mapping ``[0,1]^d`` affinely onto the box ``[lo, hi]`` (control points at Greville abscissae)."""
    kvs = tuple(KnotVector.uniform(p, e) for p, e in zip(degrees, elements))
    g = [lo[a] + (hi[a] - lo[a]) * kv.greville() for a, kv in enumerate(kvs)]
    grid = np.stack(np.meshgrid(*g, indexing="ij"), axis=-1)
    return TensorPatch.from_grid(kvs, grid)


def bilinear_patch(corners) -> TensorPatch:
    """Degree-(1,1) Bezier patch with corners ordered (0,0), (1,0), (0,1), (1,1)."""
    c = np.asarray(corners, dtype=float)
    kv = KnotVector(1, [0, 0, 1, 1])
    return TensorPatch((kv, kv), np.array([c[0], c[1], c[2], c[3]]))


def extract_subpatch(patch: TensorPatch, axis: int, lo: float, hi: float) -> TensorPatch:
    """Restriction of ``patch`` to ``xi_axis in [lo, hi]``, rescaled to [0, 1].

    ``lo`` and ``hi`` must already be knots of multiplicity ``p`` (or the domain ends).
    """
    kv = patch.kvs[axis]
    p, t = kv.degree, kv.knots
    for c in (lo, hi):
        if 0.0 < c < 1.0 and kv.multiplicity(c) < p:
            raise ArgumentError(f"cut {c} needs multiplicity {p} before extraction")
    i_lo = 0 if lo == 0.0 else int(np.searchsorted(t, lo, side="left")) - 1
    i_hi = kv.n - 1 if hi == 1.0 else int(np.searchsorted(t, hi, side="left")) - 1
    inner = t[(t > lo) & (t < hi)]
    sub = KnotVector(p, np.r_[[lo] * (p + 1), inner, [hi] * (p + 1)]).scaled(0.0, 1.0)
    H = np.moveaxis(patch._homogeneous_grid(), axis, 0)[i_lo: i_hi + 1]
    kvs = list(patch.kvs)
    kvs[axis] = sub
    return TensorPatch._from_homogeneous(tuple(kvs), np.moveaxis(H, 0, axis))


def partition_patch(patch: TensorPatch, axis: int, cuts) -> list:
    """Split along ``axis`` at parameters ``cuts`` (C0 knots are inserted as needed)."""
    cuts = sorted(float(c) for c in cuts if 0.0 < c < 1.0)
    out = patch
    for c in cuts:
        m = out.kvs[axis].multiplicity(c)
        need = out.kvs[axis].degree - m
        if need > 0:
            out = out.refined(axis, [c] * need)
    bounds = [0.0] + cuts + [1.0]
    return [extract_subpatch(out, axis, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
