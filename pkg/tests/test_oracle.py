"""Closed-form oracle checks, cross-validated against independent symbolic math."""
import numpy as np
import pytest
import sympy as sp

from fb_lab import oracle


@pytest.fixture(scope="module")
def symbolic():
    """Independent symbolic derivation of the example's gradient and Laplacians."""
    r, th = sp.symbols("r theta", positive=True)
    u = r * sp.sin(th) - r ** sp.Rational(3, 2) * sp.cos(3 * th / 2)
    w = r ** sp.Rational(3, 2) * sp.cos(3 * th / 2)
    grad2 = sp.simplify(sp.diff(u, r) ** 2 + (sp.diff(u, th) / r) ** 2)
    lap_u = sp.simplify(sp.diff(u, r, 2) + sp.diff(u, r) / r + sp.diff(u, th, 2) / r ** 2)
    lap_w = sp.simplify(sp.diff(w, r, 2) + sp.diff(w, r) / r + sp.diff(w, th, 2) / r ** 2)
    # interior vertical derivative d/dy in polar coordinates
    wy = sp.simplify(sp.sin(th) * sp.diff(w, r) + sp.cos(th) * sp.diff(w, th) / r)
    return {
        "grad2": sp.lambdify((r, th), grad2, "numpy"),
        "lap_u": lap_u,
        "lap_w": lap_w,
        "wy": wy,
        "r": r,
        "th": th,
    }


def bisect_fb(rv, lo=1e-12, hi=np.pi / 3, tol=1e-13):
    f = lambda t: np.sin(t) - np.sqrt(rv) * np.cos(1.5 * t)
    a, b = lo, hi
    assert f(a) < 0 < f(b)
    for _ in range(200):
        m = 0.5 * (a + b)
        if f(m) < 0:
            a = m
        else:
            b = m
        if b - a < tol:
            break
    return 0.5 * (a + b)


def test_example_u_point_value():
    # u(0.25, pi/2) = 0.25 - 0.25^{3/2} cos(3 pi / 4) = 0.25 + 0.125 * sqrt(2)/2
    want = 0.25 + 0.125 * np.sqrt(2) / 2
    assert abs(want - 0.33838834764831845) < 1e-15
    assert oracle.example_u(0.25, np.pi / 2) == pytest.approx(want, abs=1e-14)


def test_example_u_clipped_on_floor():
    assert oracle.example_u(0.3, 0.0) == 0.0
    assert oracle.example_u(0.3, np.pi) == 0.0


def test_example_u_vanishes_on_fb():
    rr = np.geomspace(1e-4, 0.5, 40)
    th = oracle.example_fb(rr)
    assert np.max(np.abs(oracle.example_u_raw(rr, th))) < 1e-12


def test_example_u_harmonic_symbolically(symbolic):
    assert symbolic["lap_u"] == 0


def test_fb_newton_matches_bisection():
    for rv in (1e-4, 0.01, 0.1, 0.25, 0.5):
        assert oracle.example_fb(rv) == pytest.approx(bisect_fb(rv), abs=1e-11)


def test_fb_small_radius_asymptotics():
    # theta(r)/sqrt(r) -> 1
    th = oracle.example_fb(1e-4)
    assert 0.0099 <= th <= 0.0101


def test_fb_residual_random_radii():
    rng = np.random.default_rng(20240817)
    rr = rng.uniform(1e-6, 0.5, size=100)
    th = oracle.example_fb(rr)
    res = np.abs(np.sin(th) - np.sqrt(rr) * np.cos(1.5 * th))
    assert np.max(res) < 1e-12


def test_example_Q_at_origin():
    assert oracle.example_Q(0.0) == pytest.approx(1.0, abs=1e-6)
    assert oracle.example_Q(1e-10) == pytest.approx(1.0, abs=1e-4)


def test_example_Q_matches_symbolic_gradient_on_fb(symbolic):
    # acceptance criterion 10 at unit-test scale: agreement to 1e-8 on F
    rr = np.geomspace(1e-3, 0.5, 100)
    th = oracle.example_fb(rr)
    du = np.sqrt(symbolic["grad2"](rr, th))
    q = oracle.example_Q(rr)
    assert np.max(np.abs(du - q)) < 1e-8


def test_example_Q_angular_form_on_fb():
    # on F the radial form equals 1 + 9r/4 + 3 sin(th) sin(th/2) / cos(3 th/2)
    rr = np.geomspace(1e-3, 0.5, 25)
    th = oracle.example_fb(rr)
    q2 = 1.0 + 2.25 * rr + 3.0 * np.sin(th) * np.sin(th / 2) / np.cos(1.5 * th)
    assert np.max(np.abs(oracle.example_Q(rr) ** 2 - q2)) < 1e-11


def test_example_Q_lipschitz_audit():
    # sampled difference quotients over the half disk stay below 3
    rng = np.random.default_rng(7)
    n = 4000
    r1 = np.sqrt(rng.uniform(0, 0.25, n))
    t1 = rng.uniform(0, np.pi, n)
    r2 = np.sqrt(rng.uniform(0, 0.25, n))
    t2 = rng.uniform(0, np.pi, n)
    p1 = np.stack([r1 * np.cos(t1), r1 * np.sin(t1)], axis=1)
    p2 = np.stack([r2 * np.cos(t2), r2 * np.sin(t2)], axis=1)
    d = np.linalg.norm(p1 - p2, axis=1)
    keep = d > 1e-6
    q1 = oracle.example_Q(np.hypot(p1[:, 0], p1[:, 1]))
    q2 = oracle.example_Q(np.hypot(p2[:, 0], p2[:, 1]))
    quot = np.abs(q1[keep] - q2[keep]) / d[keep]
    assert np.max(quot) <= 3.0


def test_example_Q_below_gradient_on_contact_ray():
    # stability of the contact set requires Q <= |Du| = 1 + 1.5 sqrt(r) on theta = pi
    rr = np.geomspace(1e-4, 0.5, 50)
    assert np.all(oracle.example_Q(rr) <= 1.0 + 1.5 * np.sqrt(rr) + 1e-12)


def test_signorini_profile_harmonic(symbolic):
    assert symbolic["lap_w"] == 0


def test_signorini_profile_boundary_derivatives(symbolic):
    r, th = symbolic["r"], symbolic["th"]
    wy = symbolic["wy"]
    at_pi = sp.simplify(wy.subs(th, sp.pi))
    at_0 = sp.simplify(wy.subs(th, 0))
    assert sp.simplify(at_pi + sp.Rational(3, 2) * sp.sqrt(r)) == 0
    assert at_0 == 0


def test_signorini_profile_values_and_facets():
    assert oracle.signorini_profile(0.4, np.pi) == pytest.approx(0.0, abs=1e-15)
    assert oracle.signorini_profile(0.4, 0.0) == pytest.approx(0.4 ** 1.5)
    assert oracle.signorini_facet(0.3, 0.0) == "free"
    assert oracle.signorini_facet(0.3, np.pi) == "contact"
    assert oracle.signorini_facet(0.3, 1.0) == "interior"


def test_detachment_exponent_of_fb_polyline():
    # x2 ~ x1^{3/2} as the window shrinks
    for rmax, tol in ((1e-2, 0.03), (1e-3, 0.01)):
        pts = oracle.fb_polyline(n=400, r_max=rmax, r_min=rmax / 100)
        lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
        slope = np.polyfit(lx, ly, 1)[0]
        assert abs(slope - 1.5) < tol


def test_gradient_formula_everywhere(symbolic):
    rng = np.random.default_rng(3)
    rr = rng.uniform(0.01, 0.5, 200)
    tt = rng.uniform(0.0, np.pi, 200)
    gx, gy = oracle.example_grad_xy(rr * np.cos(tt), rr * np.sin(tt))
    assert np.max(np.abs(gx ** 2 + gy ** 2 - symbolic["grad2"](rr, tt))) < 1e-12
