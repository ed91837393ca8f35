"""Barrier-patch parameterization of a single patch from fixed boundary control points.

Stage 1 removes fold-overs by driving ``sum_q [delta - det J(xi_q)]_+^2`` to
zero; stage 2 minimizes the Winslow-plus-area energy

    lambda_1 * int |J|_F^2 / det J  +  lambda_2 * int (det J)^2

whose first term becomes singular as ``det J -> 0+`` and therefore keeps the
stage-1 certificate intact.  Only interior control points move.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, BarrierViolationError, GeometryError, ParameterizationError
from .lbfgs import lbfgs_minimize
from .spline.patch import TensorPatch
from .spline.quadrature import GaussRule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BarrierConfig:
    """Settings of the two-stage optimization.

    ``delta`` is an absolute fold threshold; when ``None`` it is
    ``delta_rel`` times the area enclosed by the patch boundary.  ``lam2``
    defaults to ``1 / A^2`` with ``A`` the patch area after stage 1.
    """

    delta: float | None = None
    delta_rel: float = 1e-4
    gtol1: float = 1e-8
    gtol2: float = 1e-8
    maxiter1: int = 200
    maxiter2: int = 500
    memory: int = 10
    lam1: float = 1.0
    lam2: float | None = None
    c1: float = 1e-4
    c2: float = 0.9
    # stage 1 optimizes against (1 + stage1_margin) * delta and stops once the
    # certificate at delta holds; a pure delta target only approaches zero asymptotically
    stage1_margin: float = 1.0

    def __post_init__(self):
        if self.delta is not None and not self.delta > 0:
            raise ArgumentError("delta must be positive")
        if not self.delta_rel > 0 or not self.lam1 > 0:
            raise ArgumentError("delta_rel and lam1 must be positive")
        if self.lam2 is not None and not self.lam2 > 0:
            raise ArgumentError("lam2 must be positive")
        if self.memory < 3:
            raise ArgumentError("L-BFGS memory must be at least 3")


def _adjugate_T(J):
    """Cofactor matrices ``d det / dJ`` for a stack of 2x2 or 3x3 matrices."""
    d = J.shape[-1]
    if d == 2:
        C = np.empty_like(J)
        C[:, 0, 0] = J[:, 1, 1]
        C[:, 0, 1] = -J[:, 1, 0]
        C[:, 1, 0] = -J[:, 0, 1]
        C[:, 1, 1] = J[:, 0, 0]
        return C
    a, b = J[:, :, 0], J[:, :, 1]
    c = J[:, :, 2]
    return np.stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)], axis=-1)


def _det(J):
    if J.shape[-1] == 2:
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return np.einsum("qi,qi->q", J[:, :, 0], np.cross(J[:, :, 1], J[:, :, 2]))


class PatchProblem:
    """Interior-control-point optimization problem for one patch.

    The Jacobian at the quadrature points is affine in the interior control
    coordinates, ``J = J_fixed + sum_a D_a[:, I] X_I``, because the (rational)
    basis does not depend on the control points.
    """

    def __init__(self, patch: TensorPatch, rule: GaussRule | None = None, interior=None):
        if patch.dim != patch.pdim:
            raise ArgumentError("barrier functionals need a square Jacobian")
        self.patch = patch
        self.rule = rule or GaussRule.for_knots(patch.kvs)
        self.interior = np.asarray(patch.interior_indices if interior is None else interior)
        self.boundary = np.setdiff1d(np.arange(patch.ctrl.shape[0]), self.interior)
        _, D = patch.tabulate(self.rule.points_1d)
        self.weights = self.rule.weights()
        self.D_int = [sp.csr_matrix(Da[:, self.interior]) for Da in D]
        self.D_intT = [m.T.tocsr() for m in self.D_int]
        Xb = patch.ctrl[self.boundary]
        self.J_fixed = np.stack([Da[:, self.boundary] @ Xb for Da in D], axis=-1)  # (nq, dim, d)

    @property
    def x0(self) -> np.ndarray:
        return self.patch.ctrl[self.interior].ravel()

    def jacobians(self, x) -> np.ndarray:
        X = np.asarray(x).reshape(-1, self.patch.dim)
        J = self.J_fixed.copy()
        for a, Da in enumerate(self.D_int):
            J[:, :, a] += Da @ X
        return J

    def dets(self, x=None) -> np.ndarray:
        return _det(self.jacobians(self.x0 if x is None else x))

    def _pullback(self, G) -> np.ndarray:
        """Gradient w.r.t. interior coordinates from ``dE/dJ`` at the quadrature points."""
        out = np.zeros((self.interior.size, self.patch.dim))
        for a, DaT in enumerate(self.D_intT):
            out += DaT @ G[:, :, a]
        return out.ravel()

    def e_fold(self, x, delta: float):
        J = self.jacobians(x)
        r = np.maximum(delta - _det(J), 0.0)
        val = float(r @ r)
        G = (-2.0 * r)[:, None, None] * _adjugate_T(J)
        return val, self._pullback(G)

    def e_qual(self, x, lam1: float, lam2: float):
        J = self.jacobians(x)
        det = _det(J)
        if det.min() <= 0.0:
            raise BarrierViolationError(det.min())
        w = self.weights
        fro = np.einsum("qij,qij->q", J, J)
        val = float(lam1 * (w @ (fro / det)) + lam2 * (w @ (det * det)))
        coef_J = lam1 * w * 2.0 / det
        coef_C = -lam1 * w * fro / det**2 + lam2 * w * 2.0 * det
        G = coef_J[:, None, None] * J + coef_C[:, None, None] * _adjugate_T(J)
        return val, self._pullback(G)

    def area(self, x=None) -> float:
        return float(self.weights @ self.dets(x))

    def patch_at(self, x) -> TensorPatch:
        ctrl = self.patch.ctrl.copy()
        ctrl[self.interior] = np.asarray(x).reshape(-1, self.patch.dim)
        return self.patch.with_ctrl(ctrl)


def e_fold(prob: PatchProblem, delta: float, x=None):
    """Fold-over penalty and its gradient with respect to the interior coordinates."""
    return prob.e_fold(prob.x0 if x is None else x, delta)


def e_qual(prob: PatchProblem, lam1: float, lam2: float, x=None):
    """Winslow-plus-area energy and gradient; raises :class:`BarrierViolationError` if ``det J <= 0`` somewhere."""
    return prob.e_qual(prob.x0 if x is None else x, lam1, lam2)


def boundary_loop(patch: TensorPatch, per_side: int = 64) -> np.ndarray:
    """Sampled boundary polygon of a planar patch, counter-clockwise in parameter space."""
    t = np.linspace(0.0, 1.0, per_side, endpoint=False)
    zero, one = np.array([0.0]), np.array([1.0])
    sides = [(t, zero), (one, t), (1.0 - t, one), (zero, 1.0 - t)]
    return np.vstack([patch.tabulate(side, derivatives=False) @ patch.ctrl for side in sides])


def polygon_area(poly) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(x @ np.roll(y, -1) - y @ np.roll(x, -1))


@dataclass
class ConvergenceRecord:
    """One row per optimizer iteration: ``(stage, iteration, objective, grad_norm, min_det)``."""

    rows: list = field(default_factory=list)
    delta: float = 0.0
    lam1: float = 1.0
    lam2: float = 1.0
    stage1_iterations: int = 0
    stage2_iterations: int = 0
    stage2_status: str = ""
    e_fold_final: float = 0.0
    e_qual_initial: float = float("nan")
    e_qual_final: float = float("nan")
    min_det: float = float("nan")
    stage1_ms: float = 0.0
    stage2_ms: float = 0.0

    def write_csv(self, path_or_file, header: bool = True) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(f)
            if header:
                w.writerow(["stage", "iteration", "objective", "grad_norm", "min_det"])
            for r in self.rows:
                w.writerow([r[0], r[1], repr(float(r[2])), repr(float(r[3])), repr(float(r[4]))])
        finally:
            if own:
                f.close()


def parameterize_patch(patch: TensorPatch, config: BarrierConfig | None = None, rule: GaussRule | None = None,
                       patch_id=None):
    """Two-stage barrier-patch optimization of the interior control points.

    Returns ``(patch, record)``.  Raises :class:`ParameterizationError` if
    stage 1 cannot certify ``det J >= delta`` at every quadrature point.
    """
    cfg = config or BarrierConfig()
    if patch.pdim == 2:
        enclosed = polygon_area(boundary_loop(patch))
    else:
        enclosed = PatchProblem(patch, rule).area()
    if not abs(enclosed) > 1e-14:
        raise GeometryError(f"patch {patch_id}: boundary encloses zero area")
    delta = cfg.delta if cfg.delta is not None else cfg.delta_rel * abs(enclosed)
    prob = PatchProblem(patch, rule)
    rec = ConvergenceRecord(delta=delta, lam1=cfg.lam1)
    x = prob.x0
    if prob.interior.size == 0:
        dets = prob.dets(x)
        if dets.min() < delta:
            raise ParameterizationError(f"patch {patch_id}: no interior control points and det < delta",
                                        e_fold=float(np.sum(np.maximum(delta - dets, 0) ** 2)),
                                        min_det=float(dets.min()), patch=patch_id)
        rec.min_det = float(dets.min())
        return patch, rec

    # -- stage 1 ------------------------------------------------------------------
    t0 = time.perf_counter()
    target = delta * (1.0 + cfg.stage1_margin)

    def certified(xk, f, g):
        return prob.e_fold(xk, delta)[0] == 0.0

    def cb1(it, xk, f, g):
        rec.rows.append((1, it, f, float(np.linalg.norm(g)), float(prob.dets(xk).min())))

    f0 = prob.e_fold(x, delta)[0]
    rec.rows.append((1, 0, f0, float(np.linalg.norm(prob.e_fold(x, delta)[1])), float(prob.dets(x).min())))
    if f0 > 0.0:
        res = lbfgs_minimize(lambda z: prob.e_fold(z, target), x, memory=cfg.memory, gtol=cfg.gtol1,
                             maxiter=cfg.maxiter1, c1=cfg.c1, c2=cfg.c2, stop=certified, callback=cb1)
        x = res.x
        rec.stage1_iterations = res.nit
    rec.e_fold_final = prob.e_fold(x, delta)[0]
    rec.stage1_ms = 1e3 * (time.perf_counter() - t0)
    if rec.e_fold_final > 0.0:
        md = float(prob.dets(x).min())
        raise ParameterizationError(
            f"patch {patch_id}: stage 1 failed, E_fold={rec.e_fold_final:.3e}, min det={md:.3e}",
            e_fold=rec.e_fold_final, min_det=md, patch=patch_id)

    # -- stage 2 ------------------------------------------------------------------
    t0 = time.perf_counter()
    A = prob.area(x)
    lam2 = cfg.lam2 if cfg.lam2 is not None else 1.0 / A**2
    rec.lam2 = lam2
    rec.e_qual_initial = prob.e_qual(x, cfg.lam1, lam2)[0]

    def cb2(it, xk, f, g):
        rec.rows.append((2, it, f, float(np.linalg.norm(g)), float(prob.dets(xk).min())))

    res = lbfgs_minimize(lambda z: prob.e_qual(z, cfg.lam1, lam2), x, memory=cfg.memory, gtol=cfg.gtol2,
                         maxiter=cfg.maxiter2, c1=cfg.c1, c2=cfg.c2, callback=cb2)
    rec.stage2_iterations = res.nit
    rec.stage2_status = res.status
    x2 = res.x
    if res.f <= rec.e_qual_initial:
        x = x2
    rec.e_qual_final = prob.e_qual(x, cfg.lam1, lam2)[0]
    rec.min_det = float(prob.dets(x).min())
    rec.stage2_ms = 1e3 * (time.perf_counter() - t0)
    if not rec.min_det > 0.0:
        # unreachable while the barrier holds; kept as a hard guard
        raise ParameterizationError(f"patch {patch_id}: stage 2 lost positivity", min_det=rec.min_det, patch=patch_id)
    log.debug("patch %s: stage1 %d it, stage2 %d it (%s), E_qual %.6g -> %.6g, min det %.3e", patch_id,
              rec.stage1_iterations, rec.stage2_iterations, res.status, rec.e_qual_initial, rec.e_qual_final,
              rec.min_det)
    return prob.patch_at(x), rec


def with_overrides(cfg: BarrierConfig, **kw) -> BarrierConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
