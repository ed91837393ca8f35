"""Minimum scaled Jacobian validity indicator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTangentError
from .spline.patch import TensorPatch, patch_jacobian
from .spline.quadrature import GaussRule

HADAMARD_SLACK = 1e-12


def _scaled(J, points, patch_id):
    det = np.linalg.det(J)
    norms = np.linalg.norm(J, axis=1)  # column norms: J[q, :, a]
    prod = np.prod(norms, axis=-1)
    bad = np.flatnonzero(prod == 0.0)
    if bad.size:
        raise DegenerateTangentError(tuple(points[bad[0]]), patch_id)
    return det, det / prod


def scaled_jacobian_at(patch: TensorPatch, xi, patch_id=None) -> float:
    """``det J / prod_a |dF/dxi_a|`` at one parametric point."""
    J = patch_jacobian(patch, xi)[None]
    return float(_scaled(J, np.atleast_2d(xi), patch_id)[1][0])


def jacobians_on_rule(patch: TensorPatch, rule: GaussRule) -> np.ndarray:
    """All Jacobians at the tensor points of ``rule`` as an ``(nq, dim, d)`` array."""
    _, D = patch.tabulate(rule.points_1d)
    return np.stack([Da @ patch.ctrl for Da in D], axis=-1)


@dataclass(frozen=True)
class QualityReport:
    jmin: float
    patch: int
    xi: tuple
    min_det: tuple
    samples: str

    @property
    def valid(self) -> bool:
        return self.jmin > 0.0

    def csv_row(self, step, theta_deg) -> list:
        return [step, repr(float(theta_deg)), repr(self.jmin), self.patch, *(repr(float(v)) for v in self.xi)]

    @staticmethod
    def csv_header(pdim: int = 2) -> list:
        return ["step", "theta_deg", "jmin", "patch"] + [f"xi{a + 1}" for a in range(pdim)]


def sample_rule(patch: TensorPatch, dense: bool = False) -> GaussRule:
    return GaussRule.uniform_samples(patch.kvs, 5) if dense else GaussRule.for_knots(patch.kvs)


def min_scaled_jacobian(domain, samples=None, dense: bool = False) -> QualityReport:
    """Smallest scaled Jacobian over all patches of ``domain``.

    ``samples`` may be a single :class:`GaussRule` used for every patch, a
    sequence with one rule per patch, or ``None`` for each patch's own
    ``p + 1`` Gauss rule (``dense`` switches to 5 uniform points per span).
    Ties resolve to the lowest patch index, then the lexicographically
    smallest ``xi``.
    """
    patches = list(domain)
    if not patches:
        raise ValueError("empty domain")
    best = None
    min_dets = []
    for k, patch in enumerate(patches):
        if samples is None:
            rule = sample_rule(patch, dense)
        elif isinstance(samples, GaussRule):
            rule = samples
        else:
            rule = samples[k]
        pts = rule.points()
        det, sj = _scaled(jacobians_on_rule(patch, rule), pts, k)
        min_dets.append(float(det.min()))
        m = sj.min()
        cand = np.flatnonzero(sj == m)
        # lexicographic on (xi1, xi2, ...)
        order = np.lexsort(pts[cand].T[::-1])
        q = cand[order[0]]
        if best is None or m < best[0]:
            best = (float(m), k, tuple(float(v) for v in pts[q]))
    desc = "dense5" if dense and samples is None else "gauss"
    return QualityReport(best[0], best[1], best[2], tuple(min_dets), desc)
