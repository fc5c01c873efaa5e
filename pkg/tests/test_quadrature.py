"""Circle and ball quadrature against analytic and high-resolution oracles."""
import numpy as np
import pytest
from scipy import integrate

from fb_lab import oracle
from fb_lab.grid import DomainGeometry, GridSpec, RadiusError, ScalarField, build_masks
from fb_lab.quadrature import Membership, ball_integral, circle_integral


def upper_half(spec):
    mask = build_masks(DomainGeometry(spec)).closure
    pred = lambda x, y: (np.hypot(x, y) <= spec.half_width + 1e-12) & (y >= -1e-12)
    return mask, pred


def make(spec, fn):
    mask, pred = upper_half(spec)
    f = ScalarField.from_function(spec, fn, mask)
    return f, Membership(spec, mask, pred)


def test_circle_constant():
    spec = GridSpec(1.0, 1.0 / 64)
    f, mem = make(spec, lambda x, y: np.ones_like(x))
    for r in (0.1, 0.33, 0.7):
        val = circle_integral(f, r, mem)
        assert abs(val - np.pi * r) / (np.pi * r) < 1e-3


def test_circle_height_squared():
    # integral of y^2 over the upper half circle is pi r^3 / 2, so H(r) for
    # w = y is (pi/2) r^2
    spec = GridSpec(1.0, 1.0 / 64)
    f, mem = make(spec, lambda x, y: y ** 2)
    for r in (0.2, 0.5):
        val = circle_integral(f, r, mem)
        assert val == pytest.approx(np.pi * r ** 3 / 2, rel=5e-3)


def test_circle_profile_squared():
    # w* = r^{3/2} cos(3 theta/2): integral of w*^2 = r^4 * pi/2, H = (pi/2) r^3
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = make(spec, lambda x, y: oracle.signorini_profile_xy(x, y) ** 2)
    for r in (0.25, 0.5):
        val = circle_integral(f, r, mem)
        assert val == pytest.approx(np.pi / 2 * r ** 4, rel=5e-3)


def test_circle_radius_errors():
    spec = GridSpec(1.0, 1.0 / 64)
    f, mem = make(spec, lambda x, y: np.ones_like(x))
    with pytest.raises(RadiusError):
        circle_integral(f, 1e-3, mem)
    with pytest.raises(RadiusError):
        circle_integral(f, 0.999, mem)


def test_ball_constant():
    spec = GridSpec(1.0, 1.0 / 64)
    f, mem = make(spec, lambda x, y: np.ones_like(x))
    for r in (0.25, 0.5):
        val = ball_integral(f, r, mem)
        want = np.pi * r ** 2 / 2
        assert abs(val - want) / want < 2 * spec.spacing / r


def test_ball_gradient_energy_of_profile():
    # |Dw*|^2 = (9/4) r; oracle: int_0^r int_0^pi (9/4) rho * rho dtheta drho
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = make(spec, lambda x, y: 2.25 * np.hypot(x, y))
    r = 0.5
    orc, _ = integrate.quad(lambda rho: 2.25 * rho * rho * np.pi, 0.0, r)
    val = ball_integral(f, r, mem)
    assert val == pytest.approx(orc, rel=0.02)
    assert orc == pytest.approx(2.25 * np.pi * r ** 3 / 3, rel=1e-12)


def test_quadrature_refinement_shrinks_error():
    # halving h should not grow the error by more than 10%
    errs_c, errs_b = [], []
    for n in (32, 64, 128):
        spec = GridSpec(1.0, 1.0 / n)
        f, mem = make(spec, lambda x, y: oracle.signorini_profile_xy(x, y) ** 2)
        r = 0.375
        errs_c.append(abs(circle_integral(f, r, mem) - np.pi / 2 * r ** 4))
        g, mem2 = make(spec, lambda x, y: 2.25 * np.hypot(x, y))
        errs_b.append(abs(ball_integral(g, r, mem2) - 2.25 * np.pi * r ** 3 / 3))
    assert errs_c[2] <= errs_c[0] * 1.1
    assert errs_b[2] <= errs_b[1] * 1.1 and errs_b[1] <= errs_b[0] * 1.1


def test_mask_membership_tracks_positivity():
    # membership from a solved-style mask: positivity set of the example
    spec = GridSpec(0.5, 0.5 / 64)
    mask = build_masks(DomainGeometry(spec)).closure
    u = ScalarField.from_function(spec, oracle.example_u_xy, mask)
    from fb_lab.quadrature import membership_from_field

    mem = membership_from_field(u)
    # the wedge below F is excluded, the bulk above is included
    assert not mem.points_inside(0.3, 0.01)[0]
    assert mem.points_inside(0.0, 0.25)[0]
    f = ScalarField.from_function(spec, lambda x, y: np.ones_like(x), mask)
    r = 0.25
    # arc from theta_F(r) to pi has length r (pi - theta_F)
    th = oracle.example_fb(r)
    want = r * (np.pi - th)
    got = circle_integral(f, r, mem)
    assert got == pytest.approx(want, rel=0.05)
