import io
import math

import numpy as np
import pytest

from splinemove.errors import PairingError
from splinemove.spline.multipatch import MultiPatchDomain
from splinemove.spline.patch import bilinear_patch, degree_elevate, patch_eval, uniform_refine
from splinemove.transfer import (SnapshotPair, SplineField, area_scaled_copy, dgcl_check, field_space,
                                 local_functionals, mesh_velocity, mesh_velocity_divergence, pullback_values,
                                 quasi_interpolate, transfer)
from splinemove.spline.knots import KnotVector


def curved_patch(refine=1, elevate=1):
    p = degree_elevate(bilinear_patch([(0, 0), (2, 0.3), (0.2, 1.5), (1.8, 1.9)]), elevate)
    ctrl = p.ctrl.copy()
    ctrl[4] += [0.15, -0.1]  # bend the middle control point
    return uniform_refine(p.with_ctrl(ctrl), refine)


def ev(patch, xi):
    """Pointwise evaluation, independent of the batched basis rows used by the fields."""
    return np.array([patch_eval(patch, x) for x in xi])


def global_field(space, rng, ncomp=2):
    """Random field that is continuous across interfaces."""
    maps, n = space.global_numbering
    G = rng.normal(size=(n, ncomp))
    return SplineField(space, tuple(G[m] for m in maps))


def samples(rng, n=200):
    return rng.uniform(0.0, 1.0, size=(n, 2))


# -- quasi-interpolation -----------------------------------------------------------------
@pytest.mark.parametrize("p", [0, 1, 2, 3, 4])
def test_local_functionals_reproduce_the_basis(p):
    inner = [0.2, 0.5, 0.5, 0.7] if p >= 2 else [0.2, 0.5, 0.7]
    kv = KnotVector(p, [0.0] * (p + 1) + inner + [1.0] * (p + 1))
    pts, wts = local_functionals(kv)
    for i in range(kv.n):
        B = kv.basis_matrix(pts[i]).toarray()
        assert np.allclose(wts[i] @ B, np.eye(kv.n)[i], atol=1e-12)


@pytest.mark.parametrize("elevate", [0, 1])
def test_constants_are_reproduced(square_ref, elevate):
    space = field_space(square_ref, elevate)
    f = quasi_interpolate(lambda k, pts: np.tile([1.5, -0.25], (len(pts), 1)), space, elevate)
    for c in f.coeffs:
        assert np.abs(c - [1.5, -0.25]).max() < 1e-12


def test_splines_are_fixed_points(square_ref):
    rng = np.random.default_rng(0)
    u = global_field(square_ref, rng)
    q = quasi_interpolate(u.values_at, square_ref)
    for a, b in zip(u.coeffs, q.coeffs):
        assert np.abs(a - b).max() < 1e-12
    pts = samples(rng)
    for k in range(len(square_ref)):
        assert np.abs(q.values_at(k, pts) - u.values_at(k, pts)).max() < 1e-12


def test_rational_geometry_space():
    kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
    from splinemove.spline.patch import TensorPatch

    w = np.array([1, 0.7, 1, 0.7, 0.5, 0.7, 1, 0.7, 1.0])
    p = TensorPatch((kv, kv), np.random.default_rng(1).normal(size=(9, 2)), w)
    dom = MultiPatchDomain((p,))
    f = quasi_interpolate(lambda k, pts: np.ones((len(pts), 1)), dom)
    assert np.abs(f.coeffs[0] - 1.0).max() < 1e-12


def test_smooth_field_convergence_rate():
    def g(x):
        return np.sin(2 * x[:, 0]) * np.cos(3 * x[:, 1])

    rng = np.random.default_rng(2)
    pts = samples(rng, 400)
    errs = []
    for r in (2, 3, 4):
        geo = curved_patch(refine=r)
        dom = MultiPatchDomain((geo,))
        f = quasi_interpolate(lambda k, xi: g(ev(geo, xi)), dom)
        errs.append(np.abs(f.values_at(0, pts)[:, 0] - g(ev(geo, pts))).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    slope = np.polyfit(np.arange(3), np.log2(errs), 1)[0]
    p = geo.degrees[0]
    assert -slope >= p + 0.5
    assert rates.min() >= p + 0.5


# -- mesh velocity -----------------------------------------------------------------------
def test_identical_snapshots_give_zero_velocity(square_ref):
    pair = SnapshotPair(square_ref, square_ref, 0.05)
    w = mesh_velocity(pair)
    assert all(np.all(c == 0.0) for c in w.coeffs)
    assert mesh_velocity_divergence(pair) == 0.0


def test_translation_gives_constant_velocity(square_ref):
    moved = square_ref.with_patches([p.translated([0.3, -0.1]) for p in square_ref])
    pair = SnapshotPair(square_ref, moved, 0.1)
    w = mesh_velocity(pair)
    for c in w.coeffs:
        assert np.abs(c - [3.0, -1.0]).max() < 1e-12
    assert mesh_velocity_divergence(pair) < 1e-12


@pytest.mark.parametrize("which", ["slip", "fixed-knots"])
def test_mesh_velocity_matches_map_difference(slip_sequence, square_ref, which):
    if which == "slip":
        prev, cur = slip_sequence[0], slip_sequence[1]
    else:
        from splinemove.movers import RotationMover, annulus_boundary

        mover = RotationMover("HE", square_ref, annulus_boundary(square_ref, (0.5, 0.5)))
        prev, cur = square_ref, mover.total(math.radians(2.25))
    dt = 0.05
    pair = SnapshotPair(prev, cur, dt)
    assert pair.same_knots == (which == "fixed-knots")
    w = mesh_velocity(pair)
    xi = samples(np.random.default_rng(4), 100)
    for k in range(len(cur)):
        ref = (ev(cur[k], xi) - ev(prev[k], xi)) / dt
        got = w.values_at(k, xi)
        assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()
    assert mesh_velocity_divergence(pair) > 0.0


def test_pairing_errors(square_ref, slip_sequence):
    with pytest.raises(PairingError):
        SnapshotPair(square_ref, square_ref, 0.0)
    with pytest.raises(PairingError):
        SnapshotPair(square_ref, field_space(square_ref, 1))
    with pytest.raises(PairingError):
        SplineField(square_ref, (np.zeros((3, 2)),) * 4)


# -- transfer ----------------------------------------------------------------------------
def test_pullback_of_old_geometry(slip_sequence):
    prev, cur = slip_sequence[0], slip_sequence[1]
    pair = SnapshotPair(prev, cur)
    geo = SplineField(prev, tuple(p.ctrl for p in prev))
    xi = samples(np.random.default_rng(5), 50)
    for k in range(len(prev)):
        assert np.abs(pullback_values(pair, geo, k, xi) - ev(prev[k], xi)).max() < 1e-13


def test_transfer_between_identical_snapshots(square_ref):
    u = global_field(square_ref, np.random.default_rng(6))
    v = transfer(SnapshotPair(square_ref, square_ref), u)
    for a, b in zip(u.coeffs, v.coeffs):
        assert np.abs(a - b).max() < 1e-12


def test_linear_field_on_translated_snapshots(square_ref):
    A = np.array([[0.3, -1.2], [0.7, 0.4]])
    b = np.array([0.5, -2.0])
    d = np.array([0.2, 0.15])
    moved = square_ref.with_patches([p.translated(d) for p in square_ref])
    # x is itself a spline on the geometry space, so A x + b is represented exactly
    u = SplineField(square_ref, tuple(p.ctrl @ A.T + b for p in square_ref))
    v = transfer(SnapshotPair(square_ref, moved), u)
    xi = samples(np.random.default_rng(7), 200)
    for k, p in enumerate(moved):
        x = ev(p, xi)
        assert np.abs(v.values_at(k, xi) - ((x - d) @ A.T + b)).max() < 1e-9


def test_transfer_is_linear(slip_sequence):
    rng = np.random.default_rng(8)
    prev, cur = slip_sequence[1], slip_sequence[2]
    pair = SnapshotPair(prev, cur)
    f, g = global_field(prev, rng), global_field(prev, rng)
    lhs = transfer(pair, f.combine(g, 2.0, -0.5))
    rhs = transfer(pair, f).combine(transfer(pair, g), 2.0, -0.5)
    for a, b in zip(lhs.coeffs, rhs.coeffs):
        assert np.abs(a - b).max() < 1e-12 * (1 + np.abs(a).max())


def test_transfer_into_elevated_space(slip_sequence):
    pair = SnapshotPair(slip_sequence[0], slip_sequence[1])
    u = SplineField.constant(field_space(slip_sequence[0], 1), [2.0, 1.0], elevation=1)
    v = transfer(pair, u)
    assert v.space[0].degrees == (3, 3)
    assert all(np.abs(c - [2.0, 1.0]).max() < 1e-12 for c in v.coeffs)


# -- DGCL harness ------------------------------------------------------------------------
def test_dgcl_zero_field(slip_sequence):
    assert dgcl_check(slip_sequence, [0.0, 0.0]).max_drift == 0.0


@pytest.mark.parametrize("elevation", [0, 1])
def test_dgcl_constant_field(slip_sequence, elevation):
    rep = dgcl_check(slip_sequence, [1.0, 0.5], dt=0.01, elevation=elevation)
    assert rep.max_drift < 1e-12
    assert len(rep.rows) == len(slip_sequence) - 1
    assert all(r[2] > 0 for r in rep.rows)


def test_dgcl_negative_control_is_detected(slip_sequence):
    rep = dgcl_check(slip_sequence, [1.0, 0.5], operator=area_scaled_copy)
    assert rep.max_drift > 1e-3


def test_dgcl_needs_two_snapshots(slip_sequence):
    with pytest.raises(PairingError):
        dgcl_check(slip_sequence[:1], [1.0, 0.5])


def test_dgcl_csv(slip_sequence):
    rep = dgcl_check(slip_sequence[:2], [1.0, 0.5])
    buf = io.StringIO()
    rep.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,max_drift,max_div_w"
    assert len(lines) == 2
