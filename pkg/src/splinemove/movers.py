"""Classical mesh-motion baselines: harmonic, elastic and biharmonic extension of boundary motion.

Unknowns are the control-point displacements of the conforming multi-patch
space (shared interface points are single unknowns).  All operators are
assembled by Galerkin projection with the patch's ``p + 1`` Gauss rule and
solved with a sparse direct factorization.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, CapabilityError, ParameterizationError, SolverError
from .quality import min_scaled_jacobian
from .spline.multipatch import MultiPatchDomain
from .spline.quadrature import GaussRule

log = logging.getLogger(__name__)

HARMONIC = "harmonic"
ELASTIC = "elastic"
BIHARMONIC = "biharmonic"

METHODS = ("HE", "IHE", "LE", "ILE", "BHE", "BP")


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# -- assembly ------------------------------------------------------------------------
def _selection(maps_k, n):
    m = maps_k.size
    return sp.csr_matrix((np.ones(m), (np.arange(m), maps_k)), shape=(m, n))


def _patch_gradients(patch, rule):
    """Physical basis gradients and ``w * det`` at the Gauss points of one planar patch."""
    R, (D1, D2) = patch.tabulate(rule.points_1d)
    J = np.stack([D1 @ patch.ctrl, D2 @ patch.ctrl], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if det.min() <= 0:
        raise SolverError("cannot assemble on a folded configuration")
    Gx = sp.diags(J[:, 1, 1] / det) @ D1 - sp.diags(J[:, 1, 0] / det) @ D2
    Gy = sp.diags(-J[:, 0, 1] / det) @ D1 + sp.diags(J[:, 0, 0] / det) @ D2
    return R, Gx.tocsr(), Gy.tocsr(), rule.weights() * det


def assemble_scalar(domain: MultiPatchDomain):
    """Global stiffness ``int grad N_i . grad N_j`` and mass ``int N_i N_j`` matrices."""
    maps, n = domain.global_numbering
    K = sp.csr_matrix((n, n))
    M = sp.csr_matrix((n, n))
    for k, patch in enumerate(domain):
        R, Gx, Gy, w = _patch_gradients(patch, GaussRule.for_knots(patch.kvs))
        W = sp.diags(w)
        P = _selection(maps[k], n)
        K = K + P.T @ (Gx.T @ W @ Gx + Gy.T @ W @ Gy) @ P
        M = M + P.T @ (R.T @ W @ R) @ P
    return K.tocsr(), M.tocsr()


def lame(E: float, nu: float):
    """Plane-strain Lame constants."""
    if not (E > 0 and -1.0 < nu < 0.5):
        raise ArgumentError("need E > 0 and -1 < nu < 1/2")
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def assemble_elastic(domain: MultiPatchDomain, E: float = 1.0, nu: float = 0.3):
    """Small-strain isotropic stiffness; unknowns ordered ``[u_x (all), u_y (all)]``."""
    lam, mu = lame(E, nu)
    maps, n = domain.global_numbering
    blocks = {key: sp.csr_matrix((n, n)) for key in ("xx", "xy", "yy")}
    for k, patch in enumerate(domain):
        _, Gx, Gy, w = _patch_gradients(patch, GaussRule.for_knots(patch.kvs))
        W = sp.diags(w)
        P = _selection(maps[k], n)
        xx, yy, xy, yx = Gx.T @ W @ Gx, Gy.T @ W @ Gy, Gx.T @ W @ Gy, Gy.T @ W @ Gx
        blocks["xx"] = blocks["xx"] + P.T @ ((lam + 2 * mu) * xx + mu * yy) @ P
        blocks["yy"] = blocks["yy"] + P.T @ ((lam + 2 * mu) * yy + mu * xx) @ P
        blocks["xy"] = blocks["xy"] + P.T @ (lam * xy + mu * yx) @ P
    return sp.bmat([[blocks["xx"], blocks["xy"]], [blocks["xy"].T, blocks["yy"]]], format="csc")


def boundary_flux_load(domain: MultiPatchDomain, faces, flux):
    """``b_i = int_face flux(x, n) N_i ds`` for every ``(patch, side)`` in ``faces``.

    ``flux(x, n)`` returns an ``(nq, dim)`` array; ``n`` is the outward unit
    normal of the domain.
    """
    maps, n = domain.global_numbering
    out = np.zeros((n, 2))
    for k, side in faces:
        patch = domain[k]
        axis = {"west": 0, "east": 0, "south": 1, "north": 1}[side]
        end = 0.0 if side in ("west", "south") else 1.0
        kv = patch.kvs[1 - axis]
        rule = GaussRule.for_knots((kv,))
        pts = [None, None]
        pts[1 - axis] = rule.points_1d[0]
        pts[axis] = np.array([end])
        R, D = patch.tabulate(pts)
        x = R @ patch.ctrl
        t = D[1 - axis] @ patch.ctrl
        d = D[axis] @ patch.ctrl
        ds = np.linalg.norm(t, axis=1)
        nrm = np.c_[t[:, 1], -t[:, 0]] / ds[:, None]
        # outward: pointing away from the patch interior (against the inward cross derivative)
        sign = np.sign(np.einsum("qi,qi->q", nrm, d)) * (1.0 if end == 1.0 else -1.0)
        nrm = nrm * sign[:, None]
        vals = flux(x, nrm)
        P = _selection(maps[k], n)
        out += P.T @ (R.T @ (vals * (rule.weights() * ds)[:, None]))
    return out


# -- problems --------------------------------------------------------------------------
@dataclass
class ExtensionProblem:
    """Dirichlet extension of boundary control-point displacements into the domain.

    ``fixed`` / ``values`` give the prescribed global control points and their
    displacement.  For the clamped biharmonic variant ``flux_faces`` and
    ``flux`` supply the normal derivative ``du/dn`` on the moving boundary
    (zero elsewhere).
    """

    domain: MultiPatchDomain
    fixed: np.ndarray
    values: np.ndarray
    kind: str = HARMONIC
    E: float = 1.0
    nu: float = 0.3
    biharmonic_bc: str = "clamped"
    flux_faces: tuple = ()
    flux: object = None

    def __post_init__(self):
        self.fixed = np.asarray(self.fixed, dtype=int)
        self.values = np.asarray(self.values, dtype=float).reshape(self.fixed.size, -1)
        if self.kind not in (HARMONIC, ELASTIC, BIHARMONIC):
            raise ArgumentError(f"unknown extension operator {self.kind!r}")
        if self.kind == ELASTIC:
            lame(self.E, self.nu)


def _dirichlet_solve(A, rhs, fixed, values):
    n = A.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    x = np.zeros(n)
    x[fixed] = values
    if free.size:
        A = A.tocsr()
        b = rhs[free] - A[free][:, fixed] @ values
        try:
            x[free] = spla.spsolve(A[free][:, free].tocsc(), b)
        except RuntimeError as err:  # singular factor
            raise SolverError(str(err)) from err
        if not np.all(np.isfinite(x)):
            raise SolverError("extension system is singular")
    return x


def assemble_and_solve(prob: ExtensionProblem) -> np.ndarray:
    """Displacement of every global control point, shape ``(n_global, 2)``."""
    dom = prob.domain
    _, n = dom.global_numbering
    if prob.kind == HARMONIC:
        K, _ = assemble_scalar(dom)
        return np.stack([_dirichlet_solve(K, np.zeros(n), prob.fixed, prob.values[:, c]) for c in range(2)], axis=1)
    if prob.kind == ELASTIC:
        K = assemble_elastic(dom, prob.E, prob.nu)
        fixed = np.r_[prob.fixed, prob.fixed + n]
        vals = np.r_[prob.values[:, 0], prob.values[:, 1]]
        u = _dirichlet_solve(K, np.zeros(2 * n), fixed, vals)
        return np.stack([u[:n], u[n:]], axis=1)
    return _solve_biharmonic(prob)


def _solve_biharmonic(prob: ExtensionProblem) -> np.ndarray:
    """Mixed (Ciarlet-Raviart) form ``w = -Lap u``, ``-Lap w = 0`` on the C0 multi-patch space.

    ``biharmonic_bc="clamped"`` imposes ``u`` and ``du/dn``; ``"natural"``
    imposes ``u`` and ``Lap u = 0``, which reproduces the harmonic extension.
    """
    dom = prob.domain
    if min(min(p.degrees) for p in dom) < 2:
        raise CapabilityError("biharmonic extension needs spline degree p >= 2")
    K, M = assemble_scalar(dom)
    _, n = dom.global_numbering
    fixed = prob.fixed
    free = np.setdiff1d(np.arange(n), fixed)
    if prob.biharmonic_bc == "natural":
        return assemble_and_solve(ExtensionProblem(dom, fixed, prob.values, HARMONIC))
    if prob.biharmonic_bc != "clamped":
        raise ArgumentError("biharmonic_bc must be 'clamped' or 'natural'")
    h = np.zeros((n, 2))
    if prob.flux is not None and prob.flux_faces:
        h = boundary_flux_load(dom, prob.flux_faces, prob.flux)
    K = K.tocsr()
    KI = K[free]
    A = sp.bmat([[M, -K[:, free]], [KI, None]], format="csc")
    try:
        lu = spla.splu(A)
    except RuntimeError as err:
        raise SolverError(str(err)) from err
    out = np.zeros((n, 2))
    for c in range(2):
        ub = prob.values[:, c]
        rhs = np.r_[-h[:, c] + K[:, fixed] @ ub, np.zeros(free.size)]
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverError("biharmonic system is singular")
        out[fixed, c] = ub
        out[free, c] = sol[n:]
    return out


def apply_extension(domain: MultiPatchDomain, displacement) -> MultiPatchDomain:
    """Move every global control point by ``displacement`` (indexed like ``global_ctrl``)."""
    U = np.asarray(displacement, dtype=float)
    if not np.any(U):
        return domain
    return domain.with_global_ctrl(domain.global_ctrl() + U)


# -- rotating-boundary drivers ---------------------------------------------------------
@dataclass(frozen=True)
class MovingBoundary:
    """Which global control points move rigidly (``inner``) and which stay put (``outer``)."""

    inner: np.ndarray
    outer: np.ndarray
    inner_faces: tuple
    center: tuple


def annulus_boundary(domain: MultiPatchDomain, center) -> MovingBoundary:
    maps, _ = domain.global_numbering
    inner = np.unique(np.concatenate([maps[k][p.face_indices("north")] for k, p in enumerate(domain)]))
    outer = np.unique(np.concatenate([maps[k][p.face_indices("south")] for k, p in enumerate(domain)]))
    return MovingBoundary(inner, outer, tuple((k, "north") for k in range(len(domain))), tuple(center))


def rotation_problem(domain: MultiPatchDomain, bnd: MovingBoundary, theta: float, kind: str, **kw) -> ExtensionProblem:
    """Extension problem for a rigid rotation of the inner boundary by ``theta`` about ``bnd.center``."""
    X = domain.global_ctrl()
    c = np.asarray(bnd.center)
    R = rotation_matrix(theta)
    du_inner = (X[bnd.inner] - c) @ R.T + c - X[bnd.inner]
    fixed = np.r_[bnd.inner, bnd.outer]
    values = np.vstack([du_inner, np.zeros((bnd.outer.size, 2))])
    G = R - np.eye(2)
    flux = lambda x, nrm: nrm @ G.T  # noqa: E731  d/dn of (R - I)(x - c)
    return ExtensionProblem(domain, fixed, values, kind, flux_faces=bnd.inner_faces, flux=flux, **kw)


KIND_OF = {"HE": HARMONIC, "IHE": HARMONIC, "LE": ELASTIC, "ILE": ELASTIC, "BHE": BIHARMONIC}


@dataclass
class SweepResult:
    method: str
    theta_max_deg: float
    steps: int
    wall_ms: float
    history: list = field(default_factory=list)

    def csv_row(self) -> list:
        return [self.method, f"{self.theta_max_deg:.1f}", self.steps, f"{self.wall_ms:.1f}"]


class RotationMover:
    """Evaluates validity of one method at an angle, with state for the incremental variants."""

    def __init__(self, method: str, reference: MultiPatchDomain, bnd: MovingBoundary, increment_deg: float = 0.5,
                 E: float = 1.0, nu: float = 0.3, biharmonic_bc: str = "clamped"):
        if method not in KIND_OF:
            raise ArgumentError(f"unknown classical method {method!r}")
        self.method = method
        self.kind = KIND_OF[method]
        self.incremental = method.startswith("I")
        self.reference = reference
        self.bnd = bnd
        self.increment = math.radians(increment_deg)
        self.opts = dict(E=E, nu=nu, biharmonic_bc=biharmonic_bc)
        self.solves = 0

    def _solve(self, dom, theta):
        self.solves += 1
        return apply_extension(dom, assemble_and_solve(rotation_problem(dom, self.bnd, theta, self.kind, **self.opts)))

    def total(self, theta):
        return self._solve(self.reference, theta)

    def advance(self, dom, dtheta):
        """One incremental step of ``dtheta`` applied to the current configuration ``dom``."""
        n = max(1, math.ceil(abs(dtheta) / self.increment - 1e-9))
        for _ in range(n):
            dom = self._solve(dom, dtheta / n)
            if not _valid(dom):
                return dom
        return dom


def _valid(dom) -> bool:
    try:
        return min_scaled_jacobian(dom).jmin > 0.0
    except Exception:  # degenerate tangent counts as invalid
        return False


def _bisect(lo, hi, valid_at, resolution):
    """Last valid angle on the grid ``lo + k * resolution`` inside ``[lo, hi)``."""
    a, b = 0, max(1, int(round((hi - lo) / resolution)))
    while b - a > 1:
        m = (a + b) // 2
        if valid_at(lo + m * resolution):
            a = m
        else:
            b = m
    return round(lo + a * resolution, 10)


def max_rotation_sweep(method: str, step_deg: float = 0.5, resolution_deg: float = 0.1, limit_deg: float = 360.0,
                       reference: MultiPatchDomain | None = None, bnd: MovingBoundary | None = None,
                       annulus=None, **opts) -> SweepResult:
    """Largest rotation (degrees) for which the method keeps ``J_min > 0``.

    Coarse steps of ``step_deg`` locate the first failure; bisection then
    narrows the bracket to ``resolution_deg``.  ``BP`` rebuilds the barrier
    parameterization without slip at every angle (``annulus`` is its spec);
    classical methods need the ``reference`` domain and its ``bnd``.
    """
    if not step_deg > 0 or not resolution_deg > 0:
        raise ArgumentError("sweep step and resolution must be positive")
    t0 = time.perf_counter()
    history = []
    if method == "BP":
        from .domains.annulus import build_annulus

        def ok(deg):
            try:
                b = build_annulus(annulus, math.radians(deg), slip=False)
            except ParameterizationError:
                return False
            return min_scaled_jacobian(b.domain).jmin > 0.0

        lo = 0.0
        while lo + step_deg <= limit_deg and ok(lo + step_deg):
            lo += step_deg
            history.append(lo)
        theta = _bisect(lo, lo + step_deg, ok, resolution_deg)
        return SweepResult(method, theta, len(history), 1e3 * (time.perf_counter() - t0), history)

    mover = RotationMover(method, reference, bnd, **opts)
    if mover.incremental:
        cur, lo = reference, 0.0
        while lo + step_deg <= limit_deg:
            nxt = mover.advance(cur, math.radians(step_deg))
            if not _valid(nxt):
                break
            cur, lo = nxt, lo + step_deg
            history.append(lo)
        base = cur
        theta = _bisect(lo, lo + step_deg, lambda d: _valid(mover.advance(base, math.radians(d - lo))), resolution_deg)
    else:
        lo = 0.0
        while lo + step_deg <= limit_deg and _valid(mover.total(math.radians(lo + step_deg))):
            lo += step_deg
            history.append(lo)
        theta = _bisect(lo, lo + step_deg, lambda d: _valid(mover.total(math.radians(d))), resolution_deg)
    return SweepResult(method, theta, mover.solves, 1e3 * (time.perf_counter() - t0), history)
