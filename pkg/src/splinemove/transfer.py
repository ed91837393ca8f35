"""Mesh velocity and field transfer between consecutive parameterizations.

Consecutive snapshots are related through equal parametric coordinates:
the point ``F^n(xi)`` of the new mesh corresponds to ``F^{n-1}(xi)`` of the old
one, so moving a field from the old mesh to the new one needs no point
location, only evaluation at the same ``xi`` followed by a local
quasi-interpolation into the new space.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import CapabilityError, InterfaceError, PairingError
from .spline.knots import KnotVector, merge_knot_vectors, missing_knots, snap_knots
from .spline.multipatch import MultiPatchDomain
from .spline.patch import TensorPatch, degree_elevate
from .spline.quadrature import GaussRule


# -- spaces and fields -----------------------------------------------------------------
def field_space(domain: MultiPatchDomain, elevate: int = 0) -> MultiPatchDomain:
    """The geometry re-expressed on a field space of degree ``p + elevate``."""
    if elevate == 0:
        return domain
    return MultiPatchDomain(tuple(degree_elevate(p, elevate) for p in domain), domain.interfaces, domain.flags)


def basis_rows(kvs, pts) -> sp.csr_matrix:
    """Tensor B-spline basis at scattered parametric points, one row per point."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ns = [kv.n for kv in kvs]
    mats = [kv.basis_matrix(pts[:, a]) for a, kv in enumerate(kvs)]
    # column index i_1 + n_1 * (i_2 + n_2 * i_3), first direction fastest
    cols = np.indices(ns[::-1]).reshape(len(ns), -1)[::-1]
    out = None
    for a, M in enumerate(mats):
        part = M.tocsc()[:, cols[a]]
        out = part if out is None else out.multiply(part)
    return sp.csr_matrix(out)


@dataclass(frozen=True, eq=False)
class SplineField:
    """Coefficients of a (vector) field on the spline space of ``space``, one array per patch."""

    space: MultiPatchDomain
    coeffs: tuple
    elevation: int = 0

    def __post_init__(self):
        cs = tuple(np.array(c, dtype=float) for c in self.coeffs)
        if len(cs) != len(self.space):
            raise PairingError("one coefficient array per patch required")
        for c, p in zip(cs, self.space):
            if c.ndim != 2 or c.shape[0] != p.ctrl.shape[0]:
                raise PairingError("coefficient array does not match the field space")
        object.__setattr__(self, "coeffs", cs)

    @property
    def n_components(self) -> int:
        return self.coeffs[0].shape[1]

    @classmethod
    def constant(cls, space: MultiPatchDomain, value, elevation: int = 0) -> "SplineField":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(space, tuple(np.tile(v, (p.ctrl.shape[0], 1)) for p in space), elevation)

    def values_at(self, k: int, pts) -> np.ndarray:
        return basis_rows(self.space[k].kvs, pts) @ self.coeffs[k]

    def combine(self, other: "SplineField", a: float = 1.0, b: float = 1.0) -> "SplineField":
        return SplineField(self.space, tuple(a * x + b * y for x, y in zip(self.coeffs, other.coeffs)), self.elevation)


def _identify(space: MultiPatchDomain, coeffs):
    """Copy shared coefficients from their owner (lowest patch index)."""
    if not space.interfaces:
        return coeffs
    maps, n = space.global_numbering
    G = np.full((n, coeffs[0].shape[1]), np.nan)
    for k in reversed(range(len(coeffs))):
        G[maps[k]] = coeffs[k]
    return tuple(G[maps[k]] for k in range(len(coeffs)))


# -- snapshot pairs ------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SnapshotPair:
    prev: MultiPatchDomain
    cur: MultiPatchDomain
    dt: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise PairingError("time step must be finite and positive")
        if not self.prev.same_layout(self.cur):
            raise PairingError("snapshots differ in patch count, control-net size or degree")

    @property
    def same_knots(self) -> bool:
        return all(all(a == b for a, b in zip(p.kvs, q.kvs)) for p, q in zip(self.prev, self.cur))


def _to_space(patch: TensorPatch, kvs) -> TensorPatch:
    out = patch
    for a, kv in enumerate(kvs):
        snapped = snap_knots(out.kvs[a], kv)
        if snapped != out.kvs[a]:
            k2 = list(out.kvs)
            k2[a] = snapped
            out = TensorPatch(tuple(k2), out.ctrl, out.weights)
        extra = missing_knots(out.kvs[a], kv)
        if extra.size:
            out = out.refined(a, extra)
    return out


def common_refinement(a: TensorPatch, b: TensorPatch):
    kvs = tuple(merge_knot_vectors(x, y) for x, y in zip(a.kvs, b.kvs))
    return _to_space(a, kvs), _to_space(b, kvs)


def _host(patches, like: MultiPatchDomain) -> MultiPatchDomain:
    try:
        return MultiPatchDomain(tuple(patches), like.interfaces, like.flags)
    except InterfaceError:
        return MultiPatchDomain(tuple(patches), (), like.flags)


def mesh_velocity(pair: SnapshotPair) -> SplineField:
    """``w = (F^n - F^{n-1}) / dt`` as a spline field over the new parametric domain.

    With identical knot vectors the coefficients are the control-point
    differences on the space of ``F^n``.  When the knots moved (tangential
    slip), both snapshots are first refined to their common refinement, where
    the difference is again exact.
    """
    if any(p.is_rational or q.is_rational for p, q in zip(pair.prev, pair.cur)):
        if not all(np.array_equal(p.weights, q.weights) for p, q in zip(pair.prev, pair.cur)):
            raise CapabilityError("mesh velocity of rational snapshots with changing weights is not a spline")
    if pair.same_knots:
        coeffs = tuple((q.ctrl - p.ctrl) / pair.dt for p, q in zip(pair.prev, pair.cur))
        return SplineField(pair.cur, coeffs)
    hosts, coeffs = [], []
    for p, q in zip(pair.prev, pair.cur):
        pp, qq = common_refinement(p, q)
        hosts.append(qq)
        coeffs.append((qq.ctrl - pp.ctrl) / pair.dt)
    host = _host(hosts, pair.cur)
    return SplineField(host, _identify(host, coeffs))


def mesh_velocity_divergence(pair: SnapshotPair, samples=None) -> float:
    """Largest ``|div w|`` (physical divergence on ``F^n``) over the sample points; a diagnostic."""
    w = mesh_velocity(pair)
    worst = 0.0
    for k, host in enumerate(w.space):
        rule = samples[k] if samples is not None else GaussRule.for_knots(host.kvs)
        R, D = host.tabulate(rule.points_1d)
        J = np.stack([Da @ host.ctrl for Da in D], axis=-1)
        dW = np.stack([Da @ w.coeffs[k] for Da in D], axis=-1)  # dw_i / dxi_a
        if host.is_rational:
            raise CapabilityError("divergence diagnostic assumes polynomial snapshots")
        Jinv = np.linalg.inv(J)
        div = np.einsum("qia,qai->q", dW, Jinv)
        worst = max(worst, float(np.abs(div).max()))
    return worst


def pullback_values(pair: SnapshotPair, field: SplineField, k: int, pts) -> np.ndarray:
    """Old field at the old point that shares parametric coordinates with each new point ``F^n(xi)``."""
    if len(field.space) != len(pair.cur):
        raise PairingError("field and snapshot pair have different patch counts")
    return field.values_at(k, pts)


# -- quasi-interpolation ---------------------------------------------------------------
def local_functionals(kv: KnotVector):
    """For each basis function: ``p + 1`` interpolation points and weights of its coefficient functional.

    Points are equispaced (endpoints included) on the knot span containing
    the Greville abscissa (the longer neighbour if it sits on a knot).  The
    weights are the matching row of the inverse local collocation matrix,
    so every spline of the space is reproduced exactly.
    """
    p, t = kv.degree, kv.knots
    g = kv.greville()
    pts = np.empty((kv.n, p + 1))
    wts = np.empty((kv.n, p + 1))
    for i in range(kv.n):
        spans = [k for k in range(max(i, p), min(i + p, kv.n - 1) + 1) if t[k + 1] > t[k]]
        # span containing the Greville point; ties go to the longer span
        cand = [k for k in spans if t[k] <= g[i] <= t[k + 1]]
        k = max(cand, key=lambda s: (t[s + 1] - t[s], -s)) if cand else max(spans, key=lambda s: t[s + 1] - t[s])
        a, b = t[k], t[k + 1]
        x = np.linspace(a, b, p + 1) if p > 0 else np.array([0.5 * (a + b)])
        local = kv.basis_matrix(x).toarray()[:, k - p: k + 1]
        inv = np.linalg.inv(local)
        pts[i] = x
        wts[i] = inv[i - (k - p)]
    return pts, wts


_FUNCTIONAL_CACHE: dict = {}


def _functionals(kv: KnotVector):
    key = kv.key
    hit = _FUNCTIONAL_CACHE.get(key)
    if hit is None:
        if len(_FUNCTIONAL_CACHE) > 512:
            _FUNCTIONAL_CACHE.clear()
        hit = _FUNCTIONAL_CACHE[key] = local_functionals(kv)
    return hit


def _patch_qi(kvs, provider, k, ncomp=None):
    """Coefficients on one patch; ``provider(k, pts)`` evaluates the source at parametric points."""
    ops, grids = [], []
    for kv in kvs:
        pts, wts = _functionals(kv)
        uniq, inv = np.unique(pts.ravel(), return_inverse=True)
        rows = np.repeat(np.arange(kv.n), pts.shape[1])
        A = sp.csr_matrix((wts.ravel(), (rows, inv.ravel())), shape=(kv.n, uniq.size))
        ops.append(A)
        grids.append(uniq)
    mesh = np.meshgrid(*grids[::-1], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh[::-1]], axis=1)
    vals = np.asarray(provider(k, pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    # coefficient (i_1, ..., i_d) = sum over the tensor grid, first direction fastest
    op = reduce(lambda acc, A: sp.kron(A, acc, format="csr"), ops[1:], ops[0])
    return op @ vals


def quasi_interpolate(provider, space: MultiPatchDomain, elevation: int = 0) -> SplineField:
    """Local, linear, spline-reproducing (hence constant-preserving) projection into ``space``."""
    coeffs = tuple(_patch_qi(p.kvs, provider, k) for k, p in enumerate(space))
    return SplineField(space, _identify(space, coeffs), elevation)


def transfer(pair: SnapshotPair, field: SplineField, target: MultiPatchDomain | None = None) -> SplineField:
    """Field on the old mesh -> field on the new mesh: pull back by equal ``xi``, then quasi-interpolate."""
    if len(field.space) != len(pair.prev):
        raise PairingError("field is not hosted on the previous snapshot")
    target = target or field_space(pair.cur, field.elevation)
    if len(target) != len(pair.cur):
        raise PairingError("target space does not match the new snapshot")
    return quasi_interpolate(lambda k, pts: pullback_values(pair, field, k, pts), target, field.elevation)


# -- DGCL harness ----------------------------------------------------------------------
def area_scaled_copy(pair: SnapshotPair, field: SplineField, target: MultiPatchDomain | None = None) -> SplineField:
    """Negative control: copy each coefficient from the nearest old control point, scaled by the
    ratio of lumped control-point areas (old / new).  Not constant-preserving on moving meshes.
    """
    target = target or field_space(pair.cur, field.elevation)
    old_x = np.vstack([p.ctrl for p in field.space])
    old_c = np.vstack(field.coeffs)
    old_m = np.concatenate(lumped_areas(field.space))
    new_m = lumped_areas(target)
    out = []
    for k, p in enumerate(target):
        d = np.linalg.norm(p.ctrl[:, None, :] - old_x[None], axis=-1)
        j = np.argmin(d, axis=1)
        out.append(old_c[j] * (old_m[j] / new_m[k])[:, None])
    return SplineField(target, _identify(target, out), field.elevation)


def lumped_areas(space: MultiPatchDomain):
    out = []
    for p in space:
        rule = GaussRule.for_knots(p.kvs)
        R, D = p.tabulate(rule.points_1d)
        J = np.stack([Da @ p.ctrl for Da in D], axis=-1)
        out.append(R.T @ (rule.weights() * np.abs(np.linalg.det(J))))
    return out


def drift_samples(space: MultiPatchDomain, lattice: int = 33):
    """Per patch: an ``m x m`` lattice plus all Gauss points of the patch's own rule."""
    out = []
    t = np.linspace(0.0, 1.0, lattice)
    for p in space:
        lat = np.stack([m.ravel() for m in np.meshgrid(*([t] * p.pdim), indexing="ij")[::-1]], axis=1)
        out.append(np.vstack([lat, GaussRule.for_knots(p.kvs).points()]))
    return out


def field_drift(field: SplineField, value, lattice: int = 33) -> float:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    worst = 0.0
    for k, pts in enumerate(drift_samples(field.space, lattice)):
        worst = max(worst, float(np.abs(field.values_at(k, pts) - v).max()))
    return worst


@dataclass
class DGCLReport:
    max_drift: float
    rows: list  # (step, drift, max_div_w)

    def write_csv(self, f) -> None:
        import csv

        w = csv.writer(f)
        w.writerow(["step", "max_drift", "max_div_w"])
        for r in self.rows:
            w.writerow([r[0], repr(float(r[1])), repr(float(r[2]))])


def dgcl_check(domains, u0, dt: float = 1.0, operator=transfer, elevation: int = 0, lattice: int = 33) -> DGCLReport:
    """Carry the constant field ``u0`` through ``domains`` and track ``max |u - u0|``."""
    domains = list(domains)
    if len(domains) < 2:
        raise PairingError("need at least two snapshots")
    field = SplineField.constant(field_space(domains[0], elevation), u0, elevation)
    rows = []
    worst = 0.0
    for n in range(1, len(domains)):
        pair = SnapshotPair(domains[n - 1], domains[n], dt)
        field = operator(pair, field)
        drift = field_drift(field, u0, lattice)
        worst = max(worst, drift)
        rows.append((n, drift, mesh_velocity_divergence(pair)))
    return DGCLReport(worst, rows)
