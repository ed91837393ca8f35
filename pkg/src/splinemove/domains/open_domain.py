"""Open domains: a regenerated near-body layer around a moving interface plus a frozen extension layer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..barrier import BarrierConfig, boundary_loop
from ..errors import ArgumentError, InterfaceError, ParameterizationError
from ..spline.multipatch import FROZEN, REGENERATED, Interface, MultiPatchDomain
from ..spline.patch import TensorPatch, bilinear_patch, degree_elevate, uniform_refine
from .annulus import optimize_patches


def coons_net(patch: TensorPatch) -> TensorPatch:
    """Replace the interior control points by the discrete Coons blend of the four boundary rows."""
    if patch.pdim != 2:
        raise ArgumentError("Coons initialization is planar")
    g = patch.grid().copy()  # (n1, n2, dim)
    u = patch.kvs[0].greville()[:, None, None]
    v = patch.kvs[1].greville()[None, :, None]
    S, N = g[:, :1], g[:, -1:]
    W, E = g[:1, :], g[-1:, :]
    c00, c10, c01, c11 = g[0, 0], g[-1, 0], g[0, -1], g[-1, -1]
    blend = ((1 - v) * S + v * N + (1 - u) * W + u * E
             - ((1 - u) * (1 - v) * c00 + u * (1 - v) * c10 + (1 - u) * v * c01 + u * v * c11))
    g[1:-1, 1:-1] = blend[1:-1, 1:-1]
    return TensorPatch.from_grid(patch.kvs, g, patch.weight_grid() if patch.is_rational else None)


def _segments_cross(poly) -> bool:
    """True if a closed polygon has two non-adjacent edges that intersect."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    n = len(poly)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    A, B = a[:, None], b[:, None]
    C, D = a[None], b[None]
    hit = (orient(A, B, C) * orient(A, B, D) < 0) & (orient(C, D, A) * orient(C, D, B) < 0)
    idx = np.arange(n)
    near = np.abs(idx[:, None] - idx[None]) % (n - 1) <= 1
    near |= (np.abs(idx[:, None] - idx[None]) == n - 1)
    return bool(np.any(hit & ~near))


@dataclass(frozen=True)
class OpenDomainSpec:
    """``patches[:n_near]`` are regenerated near-body patches, the rest are frozen extension patches."""

    patches: tuple
    n_near: int
    interfaces: tuple
    barrier: BarrierConfig = field(default_factory=BarrierConfig)

    def __post_init__(self):
        if not 0 < self.n_near <= len(self.patches):
            raise ArgumentError("need at least one near-body patch")
        flags = (REGENERATED,) * self.n_near + (FROZEN,) * (len(self.patches) - self.n_near)
        MultiPatchDomain(self.patches, self.interfaces, flags)  # validates conformity

    @property
    def flags(self) -> tuple:
        return (REGENERATED,) * self.n_near + (FROZEN,) * (len(self.patches) - self.n_near)

    def reference_inner(self) -> list:
        return [p.ctrl[p.face_indices("south")].copy() for p in self.patches[: self.n_near]]


def _end_tangent_angle(row: np.ndarray, end: int) -> float:
    v = row[1] - row[0] if end == 0 else row[-1] - row[-2]
    return math.atan2(v[1], v[0])


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _blend_side(ref: TensorPatch, side: str, shift: np.ndarray, angle: float = 0.0) -> np.ndarray:
    """Side row moved rigidly with its inner end, fading out towards the fixed outer end.

    The cubic fade has zero slope at both ends, so the side keeps its end
    tangents relative to the moving interface and to the fixed layer.
    """
    idx = ref.face_indices(side)
    pts = ref.ctrl[idx]
    g = ref.kvs[1].greville()
    fade = (1.0 - g * g * (3.0 - 2.0 * g))[:, None]
    rel = pts - pts[0]
    a = fade[:, 0] * angle
    c, s = np.cos(a), np.sin(a)
    rot = np.c_[c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]]
    return pts[0] + fade * shift[None] + rot


def side_rotations(spec: "OpenDomainSpec", inner_ctrl) -> dict:
    """Rotation of each near-body side shared by two near-body patches.

    The side turns by the mean rotation of the two interface tangents
    meeting at its inner end, so the corner angle is split evenly.  Sides
    on walls or frozen patches only translate.
    """
    out = {}
    for itf in spec.interfaces:
        (a, fa), (b, fb) = (itf.a, itf.side_a), (itf.b, itf.side_b)
        if a >= spec.n_near or b >= spec.n_near or fa not in ("west", "east") or fb not in ("west", "east"):
            continue
        rot = []
        for k, f in ((a, fa), (b, fb)):
            end = 0 if f == "west" else -1
            ref = spec.patches[k].ctrl[spec.patches[k].face_indices("south")]
            rot.append(_wrap(_end_tangent_angle(inner_ctrl[k], end) - _end_tangent_angle(ref, end)))
        out[(a, fa)] = out[(b, fb)] = 0.5 * (rot[0] + rot[1])
    return out


def near_body_patch(ref: TensorPatch, inner_ctrl: np.ndarray, angles=(0.0, 0.0)) -> TensorPatch:
    """Boundary rows for the new interface position, interior from the Coons blend.

    ``angles`` are the rotations applied to the west and east side curves.
    """
    south = ref.face_indices("south")
    if inner_ctrl.shape != ref.ctrl[south].shape:
        raise InterfaceError("interface control points do not match the near-body inner-boundary space")
    ctrl = ref.ctrl.copy()
    d = inner_ctrl - ref.ctrl[south]
    ctrl[south] = inner_ctrl
    for side, corner, ang in (("west", 0, angles[0]), ("east", -1, angles[1])):
        idx = ref.face_indices(side)
        ctrl[idx[1:]] = _blend_side(ref, side, d[corner], ang)[1:]
    return coons_net(ref.with_ctrl(ctrl))


def build_open_domain(spec: OpenDomainSpec, inner_ctrl, config: BarrierConfig | None = None, t=None):
    """Regenerate the near-body layer for new interface control points; extension patches are reused as is.

    Returns ``(domain, records)``.  A near-body boundary loop that
    self-intersects (interface pushed through the layer) raises
    :class:`ParameterizationError` before any optimization.
    """
    inner_ctrl = list(inner_ctrl)
    if len(inner_ctrl) != spec.n_near:
        raise InterfaceError(f"expected interface data for {spec.n_near} near-body patches")
    inner_ctrl = [np.asarray(c, dtype=float) for c in inner_ctrl]
    for k, c in enumerate(inner_ctrl):
        if c.shape != spec.patches[k].ctrl[spec.patches[k].face_indices("south")].shape:
            raise InterfaceError("interface control points do not match the near-body inner-boundary space")
    rot = side_rotations(spec, inner_ctrl)
    patches = list(spec.patches)
    for k in range(spec.n_near):
        angles = (rot.get((k, "west"), 0.0), rot.get((k, "east"), 0.0))
        p = near_body_patch(spec.patches[k], inner_ctrl[k], angles)
        if _segments_cross(boundary_loop(p, 64)):
            raise ParameterizationError(f"near-body patch {k}: boundary loop self-intersects", patch=k, theta=t)
        patches[k] = p
    dom = MultiPatchDomain(tuple(patches), spec.interfaces, spec.flags)
    if dom.interface_mismatch() > 1e-12:
        raise InterfaceError("near-body boundaries do not match their neighbours")
    dom = _sync_regenerated(dom, spec)
    return optimize_patches(dom, config or spec.barrier, t, only=range(spec.n_near))


def _sync_regenerated(dom: MultiPatchDomain, spec: OpenDomainSpec) -> MultiPatchDomain:
    """Make shared points bit-equal while leaving frozen patches untouched."""
    maps, n = dom.global_numbering
    X = np.full((n, dom.patches[0].dim), np.nan)
    # frozen patches are authoritative on their faces, then the lowest regenerated owner
    order = list(range(spec.n_near, len(dom))) + list(range(spec.n_near))
    for k in reversed(order):
        X[maps[k]] = dom[k].ctrl
    patches = list(dom.patches)
    for k in range(spec.n_near):
        patches[k] = dom[k].with_ctrl(X[maps[k]])
    return dom.with_patches(patches)


# -- perpendicular-flap preset -----------------------------------------------------------
@dataclass(frozen=True)
class FlapCase:
    spec: OpenDomainSpec
    amplitude: float
    omega: float
    height: float

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def displacement(self, pts, t: float) -> np.ndarray:
        """Prescribed bending profile ``a sin(omega t) (y / h)^2`` in x."""
        pts = np.asarray(pts, dtype=float)
        dx = self.amplitude * math.sin(self.omega * t) * (np.clip(pts[:, 1], 0.0, None) / self.height) ** 2
        return np.c_[dx, np.zeros_like(dx)]

    def inner_at(self, t: float) -> list:
        ref = self.spec.reference_inner()
        return [r + self.displacement(r, t) for r in ref]


def flap_preset(amplitude: float = 0.3, omega: float = 2.0 * math.pi / 3.0, elevate: int = 1, refine: int = 2,
                width: float = 0.1, height: float = 1.0, box=(2.0, 3.0), channel=(3.0, 4.0),
                barrier: BarrierConfig | None = None) -> FlapCase:
    """Clamped flap ``[-w/2, w/2] x [0, h]`` in the channel ``[-L, L] x [0, H]``.

    The near-body layer fills ``[-bx, bx] x [0, by]`` around the flap with
    three patches (left, top, right); five frozen rectangles fill the rest
    of the channel.
    """
    w2 = 0.5 * width
    bx, by = box
    L, H = channel
    if not (0 < w2 < bx < L and 0 < height < by < H):
        raise ArgumentError("flap, near-body box and channel must be nested")

    def fin(p):
        return uniform_refine(degree_elevate(p, elevate), refine)

    # corners ordered (0,0), (1,0), (0,1), (1,1); south = flap segment, north = box segment
    near = [
        bilinear_patch([(-w2, 0.0), (-w2, height), (-bx, 0.0), (-bx, by)]),
        bilinear_patch([(-w2, height), (w2, height), (-bx, by), (bx, by)]),
        bilinear_patch([(w2, height), (w2, 0.0), (bx, by), (bx, 0.0)]),
    ]
    ext = [
        bilinear_patch([(-L, 0.0), (-bx, 0.0), (-L, by), (-bx, by)]),
        bilinear_patch([(-L, by), (-bx, by), (-L, H), (-bx, H)]),
        bilinear_patch([(-bx, by), (bx, by), (-bx, H), (bx, H)]),
        bilinear_patch([(bx, by), (L, by), (bx, H), (L, H)]),
        bilinear_patch([(bx, 0.0), (L, 0.0), (bx, by), (L, by)]),
    ]
    patches = tuple(coons_net(fin(p)) for p in near) + tuple(fin(p) for p in ext)
    itf = (
        Interface(0, "east", 1, "west"),
        Interface(1, "east", 2, "west"),
        Interface(0, "north", 3, "east"),
        Interface(1, "north", 5, "south"),
        Interface(2, "north", 7, "west", flip=True),
        Interface(3, "north", 4, "south"),
        Interface(4, "east", 5, "west"),
        Interface(5, "east", 6, "west"),
        Interface(6, "south", 7, "north"),
    )
    spec = OpenDomainSpec(patches, 3, itf, barrier or BarrierConfig())
    # the initial near-body parameterization is the optimized reference configuration
    dom, _ = build_open_domain(spec, spec.reference_inner())
    spec = OpenDomainSpec(tuple(dom.patches), 3, itf, spec.barrier)
    return FlapCase(spec, float(amplitude), float(omega), float(height))
