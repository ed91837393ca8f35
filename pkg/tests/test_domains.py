import math

import numpy as np
import pytest

from splinemove.barrier import BarrierConfig, PatchProblem
from splinemove.domains import (SlipState, build_annulus, build_open_domain, check_containment, coons_net,
                                flap_preset, initial_annulus, reparameterize_closed, rotating_square_preset,
                                ruled_surface, slip_shift)
from splinemove.errors import ArgumentError, GeometryError, InterfaceError, ParameterizationError
from splinemove.quality import min_scaled_jacobian
from splinemove.spline.curve import ClosedCurve, SplineCurve
from splinemove.spline.knots import KnotVector
from splinemove.spline.multipatch import FROZEN, REGENERATED, Interface, MultiPatchDomain
from splinemove.spline.patch import bilinear_patch, degree_elevate, identity_patch, uniform_refine
from splinemove.spline.quadrature import GaussRule


# -- slip --------------------------------------------------------------------------------
@pytest.mark.parametrize("theta_deg, delta", [(0.0, 0.025), (360.0, 0.025), (90.0, 0.775), (-90.0, 0.275),
                                              (45.0, 0.875), (720.0, 0.025)])
def test_slip_shift_values(theta_deg, delta):
    assert slip_shift(math.radians(theta_deg)) == pytest.approx(delta, abs=1e-15)


def test_slip_shift_at_quarter_turn_is_exact():
    assert slip_shift(math.pi / 2) == 0.775


def test_slip_shift_without_corners_is_raw():
    assert slip_shift(math.radians(90.0), n_corners=0) == pytest.approx(0.75, abs=1e-15)


def test_slip_shift_bump_is_continuous():
    th = np.radians(0.01 * np.arange(36001))
    d = np.array([slip_shift(t) for t in th])
    jumps = np.abs(np.diff(d))
    jumps = np.minimum(jumps, 1.0 - jumps)
    assert jumps.max() < 0.01


def corner_distance(delta):
    return np.abs((np.asarray(delta)[..., None] - np.arange(4) / 4 + 0.5) % 1.0 - 0.5).min(axis=-1)


def test_slip_shift_keeps_off_corners_on_a_tenth_degree_scan():
    th = np.radians(0.1 * np.arange(7201))
    assert corner_distance([slip_shift(t) for t in th]).min() >= 1e-6


def test_slip_shift_crosses_corner_between_scan_points():
    # for d in (-eps_c, 0) the bump carries the shift through the corner: d + bump(d) has a root
    from scipy.optimize import brentq

    d = brentq(lambda d: d + 0.025 * (1 - (d / 0.04) ** 2) ** 2, -0.04, -1e-9, xtol=1e-16)
    # raw shift 0.75 + d: the crossing of the corner at s = 3/4, about 96.08 degrees
    theta = 2 * math.pi * (0.25 - d)
    assert corner_distance(slip_shift(theta)) < 1e-12
    sq = ClosedCurve.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    with pytest.raises(GeometryError):
        reparameterize_closed(sq, slip_shift(theta))


def test_slip_state_validation():
    with pytest.raises(ArgumentError):
        SlipState(eps_c=0.2)
    with pytest.raises(ArgumentError):
        SlipState(eps_s=0.05)
    with pytest.raises(ArgumentError):
        SlipState(delta=1.0)
    with pytest.raises(ArgumentError):
        slip_shift(float("nan"))
    assert SlipState().advanced(math.pi / 2).delta == 0.775


def random_closed_curve(seed, p=3, n=9):
    rng = np.random.default_rng(seed)
    kv = KnotVector.uniform(p, n - p)
    ctrl = rng.normal(size=(n, 2))
    ctrl[-1] = ctrl[0]
    return ClosedCurve(SplineCurve(kv, ctrl, rng.uniform(0.5, 2.0, n)))


def test_reparameterize_zero_shift_is_identity():
    c = random_closed_curve(0)
    assert reparameterize_closed(c, 0.0) is c


@pytest.mark.parametrize("seed", range(3))
def test_reparameterize_trace_identity(seed):
    c = random_closed_curve(seed)
    r = reparameterize_closed(c, 0.3)
    s = np.arange(400) / 400
    assert np.abs(r.evaluate(s) - c.evaluate(s + 0.3)).max() < 1e-10
    assert r.seam == pytest.approx(0.3)


def test_reparameterize_square_by_half():
    sq = ClosedCurve.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    with pytest.raises(GeometryError):
        reparameterize_closed(sq, 0.5)
    r = reparameterize_closed(sq, 0.55)
    s = np.arange(400) / 400
    assert np.abs(r.evaluate(s) - sq.evaluate(s + 0.55)).max() < 1e-12
    assert np.allclose(r.corner_params(), np.sort((np.arange(4) / 4 - 0.55) % 1.0))


def test_reparameterize_rejects_bad_shift():
    with pytest.raises(ArgumentError):
        reparameterize_closed(random_closed_curve(0), 1.2)


# -- annulus -----------------------------------------------------------------------------
def rotate(X, theta, c):
    cs, sn = math.cos(theta), math.sin(theta)
    return (X - c) @ np.array([[cs, -sn], [sn, cs]]).T + c


def test_ruled_surface_is_linear_in_eta():
    outer = ClosedCurve.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)])
    inner = ClosedCurve.polygon([(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)], degree=2)
    F = ruled_surface(outer, inner)
    for s in (0.1, 0.37, 0.8):
        a, b = outer.evaluate([s])[0], inner.evaluate([s])[0]
        for eta in (0.0, 0.3, 1.0):
            x = F.tabulate((np.array([s]), np.array([eta])), derivatives=False) @ F.ctrl
            assert np.allclose(x[0], (1 - eta) * a + eta * b, atol=1e-14)


def test_reference_annulus_layout(square_spec, square_ref):
    assert len(square_ref) == 4
    assert square_ref.interface_mismatch() == 0.0
    assert all(p.degrees == (2, 2) for p in square_ref)
    rep = min_scaled_jacobian(square_ref)
    assert rep.valid
    c = np.asarray(square_spec.center)
    # no-slip reference is 90-degree symmetric: patch j rotated by 90 degrees is patch j + 1
    for j in range(4):
        a = rotate(square_ref[j].ctrl, math.pi / 2, c)
        assert np.abs(a - square_ref[(j + 1) % 4].ctrl).max() < 1e-8


def test_interfaces_are_not_moved(square_spec):
    dom0, _ = initial_annulus(square_spec, math.radians(10.0))
    dom = build_annulus(square_spec, math.radians(10.0)).domain
    for p0, p in zip(dom0, dom):
        b = p0.boundary_indices
        assert np.array_equal(p0.ctrl[b], p.ctrl[b])


def test_slip_annulus_valid_at_large_angles(square_spec):
    for deg in (45.0, 450.0):
        b = build_annulus(square_spec, math.radians(deg))
        assert min_scaled_jacobian(b.domain).jmin > 0.55
        for k, rec in enumerate(b.records):
            assert rec.e_fold_final == 0.0
            assert PatchProblem(b.domain[k]).dets().min() > 0.0


def test_slip_is_periodic_over_a_quarter_turn(square_spec):
    a = build_annulus(square_spec, math.radians(11.25))
    b = build_annulus(square_spec, math.radians(101.25))
    assert abs(a.shift - b.shift - 0.25) < 1e-12 or abs(a.shift - b.shift + 0.75) < 1e-12
    assert abs(min_scaled_jacobian(a.domain).jmin - min_scaled_jacobian(b.domain).jmin) < 1e-6


def test_containment_failure():
    spec = rotating_square_preset(box=1.2)
    with pytest.raises(GeometryError):
        build_annulus(spec, math.radians(45.0))
    with pytest.raises(GeometryError):
        check_containment(spec.inner, spec.outer)


def test_preset_rejects_bad_sizes():
    with pytest.raises(ArgumentError):
        rotating_square_preset(box=0.9)


def test_no_slip_failure_reports_angle(square_spec):
    with pytest.raises(ParameterizationError) as e:
        build_annulus(square_spec, math.radians(170.0), slip=False, config=BarrierConfig(maxiter1=50))
    assert e.value.theta == pytest.approx(math.radians(170.0))


# -- multipatch --------------------------------------------------------------------------
def two_squares(shift=0.0):
    a = identity_patch(elements=(2, 2))
    b = identity_patch(elements=(2, 2), lo=(1.0 + shift, 0.0), hi=(2.0, 1.0))
    return MultiPatchDomain((a, b), (Interface(0, "east", 1, "west"),))


def test_global_numbering_merges_shared_points():
    dom = two_squares()
    maps, n = dom.global_numbering
    assert n == 2 * 16 - 4
    assert np.array_equal(maps[0][dom[0].face_indices("east")], maps[1][dom[1].face_indices("west")])
    assert np.array_equal(dom.with_global_ctrl(dom.global_ctrl())[1].ctrl, dom[1].ctrl)
    # perimeter of the merged 7 x 4 control grid
    assert dom.boundary_global_indices().size == 2 * 7 + 2 * 4 - 4


def test_mismatch_and_synchronize():
    dom = two_squares(shift=1e-3)
    assert dom.interface_mismatch() == pytest.approx(1e-3)
    assert dom.synchronized().interface_mismatch() == 0.0


def test_nonconforming_interface_rejected():
    a = identity_patch(elements=(2, 2))
    b = identity_patch(elements=(2, 3), lo=(1.0, 0.0), hi=(2.0, 1.0))
    with pytest.raises(InterfaceError):
        MultiPatchDomain((a, b), (Interface(0, "east", 1, "west"),))
    with pytest.raises(InterfaceError):
        MultiPatchDomain((a,), (), (FROZEN, REGENERATED))


def test_patch_hash_tracks_control_points():
    dom = two_squares()
    moved = dom.with_patches([dom[0], dom[1].translated([0.0, 1e-15])])
    assert dom.patch_hash(0) == moved.patch_hash(0)
    assert dom.patch_hash(1) != moved.patch_hash(1)


# -- open domain -------------------------------------------------------------------------
@pytest.fixture(scope="module")
def flap():
    return flap_preset()


def test_coons_reproduces_affine_maps():
    p = uniform_refine(degree_elevate(bilinear_patch([(0, 0), (2, 0.5), (0.3, 1), (2.3, 1.5)]), 1), 2)
    assert np.abs(coons_net(p).ctrl - p.ctrl).max() < 1e-14


def test_flap_layout(flap):
    spec = flap.spec
    assert len(spec.patches) == 8 and spec.n_near == 3
    assert spec.flags == (REGENERATED,) * 3 + (FROZEN,) * 5
    assert flap.period == pytest.approx(3.0)


def test_flap_reference_is_reproduced(flap):
    dom, _ = build_open_domain(flap.spec, flap.spec.reference_inner())
    for k in range(len(dom)):
        assert np.array_equal(dom[k].ctrl, flap.spec.patches[k].ctrl)


def test_flap_motion_keeps_frozen_patches(flap):
    ref = MultiPatchDomain(flap.spec.patches, flap.spec.interfaces, flap.spec.flags)
    dom, recs = build_open_domain(flap.spec, flap.inner_at(0.75), t=0.75)
    assert dom.interface_mismatch() == 0.0
    for k in range(flap.spec.n_near, len(dom)):
        assert dom.patch_hash(k) == ref.patch_hash(k)
        assert recs[k] is None
    inner = flap.inner_at(0.75)
    for k in range(flap.spec.n_near):
        assert np.array_equal(dom[k].ctrl[dom[k].face_indices("south")], inner[k])
    assert min_scaled_jacobian(dom).jmin > 0.5


def test_flap_zero_amplitude_is_steady():
    case = flap_preset(amplitude=0.0)
    j = {min_scaled_jacobian(build_open_domain(case.spec, case.inner_at(t))[0]).jmin for t in (0.0, 0.5, 1.3)}
    assert len(j) == 1


def test_flap_displacement_profile(flap):
    pts = np.array([[0.05, 0.0], [0.05, 0.5], [0.05, 1.0]])
    d = flap.displacement(pts, 0.75)
    assert np.allclose(d[:, 0], 0.3 * np.array([0.0, 0.25, 1.0]))
    assert np.all(d[:, 1] == 0.0)


def test_flap_overdriven_motion_fails_cleanly():
    case = flap_preset(amplitude=2.5)
    with pytest.raises(ParameterizationError):
        build_open_domain(case.spec, case.inner_at(0.75), t=0.75)


def test_flap_interface_shape_checked(flap):
    inner = flap.spec.reference_inner()
    with pytest.raises(InterfaceError):
        build_open_domain(flap.spec, inner[:2])
    with pytest.raises(InterfaceError):
        build_open_domain(flap.spec, [inner[0][:-1]] + inner[1:])


def test_flap_preset_validation():
    with pytest.raises(ArgumentError):
        flap_preset(box=(4.0, 3.0))
