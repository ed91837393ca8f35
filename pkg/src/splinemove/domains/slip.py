"""Tangential slip of a closed boundary curve: seam shift from the cumulative rotation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ArgumentError, GeometryError
from ..spline.curve import ClosedCurve, merge_curves, split_closed_curve

EPS_CORNER = 0.04
EPS_SHIFT = 0.025
SEAM_SKIP = 1e-14
CORNER_HIT = 1e-12


def _periodic_offset(x, c):
    """Signed distance from ``c`` to ``x`` on the unit circle, in ``[-0.5, 0.5)``."""
    return (x - c + 0.5) % 1.0 - 0.5


def slip_shift(theta: float, n_corners: int = 4, eps_c: float = EPS_CORNER, eps_s: float = EPS_SHIFT) -> float:
    """Seam shift for cumulative rotation ``theta`` (radians, counter-clockwise positive).

    The raw shift ``(-theta / 2 pi) mod 1`` moves the seam against the
    rotation.  Within ``eps_c`` of a corner parameter ``j / n_corners`` a
    smooth bump ``eps_s (1 - (d / eps_c)^2)^2`` pushes the split point off
    the corner.
    """
    if not math.isfinite(theta):
        raise ArgumentError("rotation angle must be finite")
    raw = (-theta / (2.0 * math.pi)) % 1.0
    if n_corners == 0:
        return raw
    j = round(raw * n_corners) % n_corners
    d = _periodic_offset(raw, j / n_corners)
    if abs(d) < eps_c:
        raw = raw + eps_s * (1.0 - (d / eps_c) ** 2) ** 2
    return raw % 1.0


@dataclass(frozen=True)
class SlipState:
    theta: float = 0.0
    delta: float = 0.0
    n_corners: int = 4
    eps_c: float = EPS_CORNER
    eps_s: float = EPS_SHIFT

    def __post_init__(self):
        if self.n_corners > 0 and not self.eps_c < 1.0 / (2 * self.n_corners):
            raise ArgumentError("corner bump supports of adjacent corners overlap")
        if not 0.0 < self.eps_s < self.eps_c:
            raise ArgumentError("bump height must satisfy 0 < eps_s < eps_c")
        if not 0.0 <= self.delta < 1.0:
            raise ArgumentError("shift must lie in [0, 1)")

    @property
    def corners(self) -> np.ndarray:
        return np.arange(self.n_corners) / max(self.n_corners, 1)

    def advanced(self, theta: float) -> "SlipState":
        return replace(self, theta=float(theta),
                       delta=slip_shift(theta, self.n_corners, self.eps_c, self.eps_s))


def reparameterize_closed(c: ClosedCurve, delta: float) -> ClosedCurve:
    """``s -> c((s + delta) mod 1)`` by splitting at ``delta`` and merging the pieces swapped."""
    if not 0.0 <= delta < 1.0:
        raise ArgumentError("shift must lie in [0, 1)")
    if delta < SEAM_SKIP or 1.0 - delta < SEAM_SKIP:
        return c
    corners = c.corner_params()
    if corners.size and np.min(np.abs(_periodic_offset(delta, corners))) < CORNER_HIT:
        raise GeometryError(f"seam split at {delta!r} hits a corner parameter; the corner bump should prevent this")
    a, b = split_closed_curve(c, delta)
    return merge_curves(b, a, corners=c.corners, seam=c.seam + delta)
