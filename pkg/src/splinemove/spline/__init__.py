"""Spline substrate: knot vectors, patches, curves, quadrature, multi-patch domains."""
from .curve import ClosedCurve, SplineCurve, merge_curves, split_closed_curve
from .knots import KnotVector, eval_basis, eval_basis_ders, find_span
from .multipatch import FROZEN, REGENERATED, Interface, MultiPatchDomain
from .patch import (
    TensorPatch,
    bilinear_patch,
    degree_elevate,
    h_refine,
    identity_patch,
    partition_patch,
    patch_eval,
    patch_jacobian,
    uniform_refine,
)
from .quadrature import GaussRule

__all__ = [
    "ClosedCurve",
    "FROZEN",
    "GaussRule",
    "Interface",
    "KnotVector",
    "MultiPatchDomain",
    "REGENERATED",
    "SplineCurve",
    "TensorPatch",
    "bilinear_patch",
    "degree_elevate",
    "eval_basis",
    "eval_basis_ders",
    "find_span",
    "h_refine",
    "identity_patch",
    "merge_curves",
    "partition_patch",
    "patch_eval",
    "patch_jacobian",
    "split_closed_curve",
    "uniform_refine",
]
