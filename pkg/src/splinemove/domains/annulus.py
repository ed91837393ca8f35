"""Closed annular domains: ruled-surface initialization, slip, partition and barrier optimization."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..barrier import BarrierConfig, parameterize_patch
from ..errors import ArgumentError, GeometryError, ParameterizationError
from ..spline.curve import ClosedCurve, SplineCurve
from ..spline.knots import KnotVector, merge_knot_vectors, missing_knots, snap_knots
from ..spline.multipatch import Interface, MultiPatchDomain
from ..spline.patch import TensorPatch, degree_elevate, partition_patch, uniform_refine
from .slip import SlipState, reparameterize_closed

log = logging.getLogger(__name__)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SPLINEMOVE_THREADS", "1")))
    except ValueError:
        return 1


def common_space(a: SplineCurve, b: SplineCurve):
    """Both curves expressed on one spline space (common degree, union of knots)."""
    if a.degree < b.degree:
        a = a.elevated(b.degree - a.degree)
    elif b.degree < a.degree:
        b = b.elevated(a.degree - b.degree)
    kv = merge_knot_vectors(a.kv, b.kv)
    out = []
    for c in (a, b):
        c = SplineCurve(snap_knots(c.kv, kv), c.ctrl, c.weights)
        extra = missing_knots(c.kv, kv)
        out.append(c.refined(extra) if extra.size else c)
    if out[0].kv != out[1].kv:
        raise GeometryError("curves could not be brought to a common spline space")
    return out[0], out[1]


def ruled_surface(outer: ClosedCurve | SplineCurve, inner: ClosedCurve | SplineCurve) -> TensorPatch:
    """``F(s, eta) = (1 - eta) outer(s) + eta inner(s)``; linear in ``eta``."""
    a = outer.curve if isinstance(outer, ClosedCurve) else outer
    b = inner.curve if isinstance(inner, ClosedCurve) else inner
    a, b = common_space(a, b)
    if not np.array_equal(a.weights, b.weights):
        raise GeometryError("ruled surface needs matching weights on both curves")
    eta = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
    w = np.r_[a.weights, b.weights]
    return TensorPatch((a.kv, eta), np.vstack([a.ctrl, b.ctrl]), None if np.all(w == 1.0) else w)


def _inside_polygon(pts, poly) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return np.count_nonzero(crosses & (x < xc), axis=1) % 2 == 1


def _distance_to_polygon(pts, poly) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ap = pts[:, None, :] - a[None]
    t = np.clip(np.einsum("qkd,kd->qk", ap, ab) / np.einsum("kd,kd->k", ab, ab), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(pts[:, None, :] - closest, axis=-1).min(axis=1)


def check_containment(outer: ClosedCurve, inner: ClosedCurve, samples: int = 256) -> None:
    """Raise :class:`GeometryError` unless every sampled inner point lies strictly inside ``outer``."""
    poly = outer.sample(max(4 * samples, 1024))
    pts = inner.sample(samples)
    scale = float(np.ptp(poly, axis=0).max())
    if not np.all(_inside_polygon(pts, poly)) or _distance_to_polygon(pts, poly).min() <= 1e-9 * scale:
        raise GeometryError("inner boundary is not strictly inside the outer boundary")


@dataclass(frozen=True)
class AnnulusSpec:
    """Closed annulus between a fixed ``outer`` curve and a rigidly moving ``inner`` curve.

    ``inner`` is the reference configuration; it is rotated about
    ``center`` by the step angle before the seam shift is applied.
    """

    outer: ClosedCurve
    inner: ClosedCurve
    center: tuple = (0.0, 0.0)
    n_patches: int = 4
    elevate: int = 1
    refine: int = 2
    barrier: BarrierConfig = field(default_factory=BarrierConfig)

    def __post_init__(self):
        if self.n_patches < 2:
            raise ArgumentError("an annulus needs at least two patches")
        if self.elevate < 0 or self.refine < 0:
            raise ArgumentError("elevation and refinement counts must be non-negative")


@dataclass
class AnnulusBuild:
    domain: MultiPatchDomain
    theta: float
    shift: float
    records: list


def annulus_interfaces(n: int) -> tuple:
    return tuple(Interface(j, "east", (j + 1) % n, "west") for j in range(n))


def initial_annulus(spec: AnnulusSpec, theta: float, slip: bool = True):
    """Steps 1-3 for one angle: rotated inner curve, seam shift, ruled surface, partition and refinement."""
    inner = spec.inner.rotated(theta, spec.center)
    check_containment(spec.outer, inner)
    state = SlipState(n_corners=inner.n_corners).advanced(theta) if slip else SlipState(n_corners=inner.n_corners)
    inner = reparameterize_closed(inner, state.delta)
    surface = ruled_surface(spec.outer, inner)
    cuts = np.arange(1, spec.n_patches) / spec.n_patches
    patches = []
    for p in partition_patch(surface, 0, cuts):
        patches.append(uniform_refine(degree_elevate(p, spec.elevate), spec.refine))
    dom = MultiPatchDomain(tuple(patches), annulus_interfaces(spec.n_patches)).synchronized()
    return dom, state


def optimize_patches(domain: MultiPatchDomain, config: BarrierConfig, theta=None, only=None):
    """Run the barrier method on the regenerated patches; returns ``(domain, records)``."""
    todo = [k for k in range(len(domain)) if (only is None or k in only)]

    def run(k):
        try:
            return parameterize_patch(domain[k], config, patch_id=k)
        except ParameterizationError as err:
            err.theta = theta
            raise

    n = thread_count()
    if n > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(run, todo))
    else:
        results = [run(k) for k in todo]
    patches = list(domain.patches)
    records = [None] * len(domain)
    for k, (patch, rec) in zip(todo, results):
        patches[k] = patch
        records[k] = rec
    return domain.with_patches(patches).synchronized(), records


def build_annulus(spec: AnnulusSpec, theta: float, slip: bool = True, config: BarrierConfig | None = None):
    """Parameterize the annulus at rotation ``theta`` (radians).

    Raises :class:`ParameterizationError` (with ``theta`` set) if any patch
    cannot be made fold-free.
    """
    dom, state = initial_annulus(spec, theta, slip)
    dom, records = optimize_patches(dom, config or spec.barrier, theta)
    return AnnulusBuild(dom, float(theta), state.delta, records)


def rotating_square_preset(L: float = 1.0, box: float = 3.0, elevate: int = 1, refine: int = 2,
                           barrier: BarrierConfig | None = None) -> AnnulusSpec:
    """Square of side ``L`` centred in a ``box * L`` square; both boundaries counter-clockwise polygons.

    The outer curve starts at its lower-left corner and the inner one at
    the square's lower-left corner, so corner ``j`` sits at ``s = j / 4`` on
    both curves and patch ``j`` spans ``s in [j/4, (j+1)/4]``.
    """
    if not (L > 0 and box > 1):
        raise ArgumentError("need L > 0 and box > 1")
    c = 0.5 * L
    h = 0.5 * box * L
    outer = ClosedCurve.polygon([(c - h, c - h), (c + h, c - h), (c + h, c + h), (c - h, c + h)])
    inner = ClosedCurve.polygon([(0.0, 0.0), (L, 0.0), (L, L), (0.0, L)])
    return AnnulusSpec(outer, inner, (c, c), 4, elevate, refine, barrier or BarrierConfig())


def degrees(theta_deg: float) -> float:
    return math.radians(theta_deg)
