import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from splinemove.errors import DegenerateTangentError
from splinemove.quality import HADAMARD_SLACK, min_scaled_jacobian, scaled_jacobian_at
from splinemove.spline.knots import KnotVector
from splinemove.spline.multipatch import Interface, MultiPatchDomain
from splinemove.spline.patch import TensorPatch, bilinear_patch, identity_patch
from splinemove.spline.quadrature import GaussRule


def affine(patch, A, b=(0.0, 0.0)):
    return patch.with_ctrl(patch.ctrl @ np.asarray(A, dtype=float).T + b)


def test_axis_aligned_affine_patch_is_one():
    p = affine(identity_patch(degrees=(3, 2), elements=(2, 2)), [[2.0, 0.0], [0.0, 3.0]], (1.0, -4.0))
    rep = min_scaled_jacobian([p])
    assert abs(rep.jmin - 1.0) < 1e-14
    assert rep.valid


def test_shear_gives_cosine_of_angle():
    p = affine(identity_patch(), [[1.0, 1.0], [0.0, 1.0]])
    assert abs(min_scaled_jacobian([p]).jmin - 1 / math.sqrt(2)) < 1e-12


def test_mirrored_net_is_negative():
    p = affine(identity_patch(), [[-1.0, 0.0], [0.0, 1.0]])
    rep = min_scaled_jacobian([p])
    assert abs(rep.jmin + 1.0) < 1e-14
    assert not rep.valid


def test_four_identity_patches():
    ps = [identity_patch(lo=(i, j), hi=(i + 1, j + 1)) for j in range(2) for i in range(2)]
    itf = (Interface(0, "east", 1, "west"), Interface(2, "east", 3, "west"),
           Interface(0, "north", 2, "south"), Interface(1, "north", 3, "south"))
    dom = MultiPatchDomain(tuple(ps), itf)
    rep = min_scaled_jacobian(dom)
    assert rep.jmin == pytest.approx(1.0, abs=1e-14)
    assert rep.patch == 0  # ties resolve to the lowest patch index


def test_location_of_minimum():
    p = bilinear_patch([(0, 0), (1, 0), (0, 1), (2, 1)])
    rep = min_scaled_jacobian([identity_patch(), p])
    assert rep.patch == 1
    pts = GaussRule.for_knots(p.kvs).points()
    sj = [scaled_jacobian_at(p, x) for x in pts]
    assert rep.jmin == pytest.approx(min(sj), abs=1e-14)
    assert np.allclose(rep.xi, pts[int(np.argmin(sj))])


def test_degenerate_tangent_raises():
    p = bilinear_patch([(0, 0), (1, 0), (0.5, 1), (0.5, 1)])
    with pytest.raises(DegenerateTangentError) as e:
        scaled_jacobian_at(p, (0.3, 1.0), patch_id=4)
    assert e.value.patch == 4
    rule = GaussRule((np.array([0.5]), np.array([0.5, 1.0])), (np.ones(1), np.ones(2)), (1, 2))
    with pytest.raises(DegenerateTangentError):
        min_scaled_jacobian([p], [rule])


def random_patch(seed):
    rng = np.random.default_rng(seed)
    kvs = (KnotVector.uniform(2, 2), KnotVector.uniform(3, 1))
    n = kvs[0].n * kvs[1].n
    return TensorPatch(kvs, rng.normal(size=(n, 2)), rng.uniform(0.5, 2.0, n))


@given(st.integers(0, 10_000))
def test_hadamard_bounds(seed):
    p = random_patch(seed)
    rule = GaussRule.uniform_samples(p.kvs, 4)
    for x in rule.points()[::3]:
        assert abs(scaled_jacobian_at(p, x)) <= 1.0 + HADAMARD_SLACK


@given(st.integers(0, 10_000), st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_rigid_invariance(seed, theta, bx, by):
    p = random_patch(seed)
    c, s = math.cos(theta), math.sin(theta)
    q = affine(p, [[c, -s], [s, c]], (bx, by))
    a, b = min_scaled_jacobian([p]), min_scaled_jacobian([q])
    assert abs(a.jmin - b.jmin) < 1e-10


def union(r1: GaussRule, r2: GaussRule) -> GaussRule:
    pts = tuple(np.union1d(a, b) for a, b in zip(r1.points_1d, r2.points_1d))
    return GaussRule(pts, tuple(np.ones(x.size) for x in pts), (0, 0))


@pytest.mark.parametrize("seed", range(6))
def test_more_samples_never_raise_the_minimum(seed):
    p = random_patch(seed)
    g = GaussRule.for_knots(p.kvs)
    u = GaussRule.uniform_samples(p.kvs, 5)
    both = union(g, u)
    m_both = min_scaled_jacobian([p], both).jmin
    assert m_both <= min_scaled_jacobian([p], g).jmin
    assert m_both <= min_scaled_jacobian([p], u).jmin


def test_dense_flag_and_csv_row():
    p = random_patch(1)
    rep = min_scaled_jacobian([p], dense=True)
    assert rep.samples == "dense5"
    row = rep.csv_row(3, 6.75)
    assert row[0] == 3 and float(row[2]) == rep.jmin
    assert len(row) == len(rep.csv_header())


def test_empty_domain():
    with pytest.raises(ValueError):
        min_scaled_jacobian([])
