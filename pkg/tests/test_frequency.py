"""Frequency quantities on sampled reference fields."""
import numpy as np
import pytest

from fb_lab import oracle
from fb_lab.frequency import (
    ArityError,
    FrequencyConfig,
    blowup,
    build_report,
    compute_H,
    compute_Ntilde,
    compute_corrections,
    geometric_radii,
    homogeneity_fit,
    monotonicity_audit,
    rellich_residual,
)
from fb_lab.grid import DomainGeometry, GridSpec, ScalarField, build_masks
from fb_lab.quadrature import Membership


def half_plane_member(spec):
    mask = build_masks(DomainGeometry(spec)).closure
    pred = lambda x, y: (np.hypot(x, y) <= spec.half_width + 1e-12) & (y >= -1e-12)
    return mask, pred


def sampled(spec, fn, pred=None):
    mask, default_pred = half_plane_member(spec)
    f = ScalarField.from_function(spec, fn, mask)
    return f, Membership(spec, mask, pred or default_pred)


def diameter_polyline(R):
    return [np.array([[-R, 0.0], [R, 0.0]])]


def test_H_of_zero_field():
    spec = GridSpec(1.0, 1.0 / 32)
    f, mem = sampled(spec, lambda x, y: np.zeros_like(x))
    assert compute_H(f, mem, 0.5) == 0.0


def test_H_of_plane_and_profile():
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = sampled(spec, lambda x, y: y)
    for r in (0.25, 0.5):
        assert compute_H(f, mem, r) == pytest.approx(np.pi / 2 * r ** 2, rel=5e-3)
    g, mem = sampled(spec, oracle.signorini_profile_xy)
    for r in (0.25, 0.5):
        assert compute_H(g, mem, r) == pytest.approx(np.pi / 2 * r ** 3, rel=5e-3)


def test_corrections_vanish_on_flat_fb():
    # w = y with F-bar = Z: x.nu = 0 and w = 0 on Z force E1 = E2 = 0
    spec = GridSpec(1.0, 1.0 / 64)
    f, mem = sampled(spec, lambda x, y: y)
    e1, e2 = compute_corrections(f, diameter_polyline(1.0), 0.5, mem)
    assert abs(e1) < 1e-12
    assert abs(e2) < 1e-10


def test_corrections_profile_small():
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = sampled(spec, oracle.signorini_profile_xy)
    e1, e2 = compute_corrections(f, diameter_polyline(1.0), 0.5, mem)
    assert abs(e1) < 1e-12          # x.nu = 0 exactly on the diameter
    assert abs(e2) < 5e-3           # w*lambda complementarity, O(h) quadrature


def test_Ntilde_plane_profile_synthetic():
    rr = geometric_radii(1.0 / 8, 0.5)
    # plane: H ~ r^2 -> N = 1; profile: H ~ r^3 -> N = 3/2
    N1, act1 = compute_Ntilde(rr, np.pi / 2 * rr ** 2, sigma=0.1)
    assert np.allclose(N1, 1.0, atol=1e-12)
    assert not act1.any()
    N2, act2 = compute_Ntilde(rr, np.pi / 2 * rr ** 3, sigma=0.1)
    assert np.allclose(N2, 1.5, atol=1e-12)
    # exact truncation branch
    N3, act3 = compute_Ntilde(rr, rr ** 3.01, sigma=0.1)
    assert act3.all()
    assert np.allclose(N3, 3.01 / 2, atol=1e-12)
    with pytest.raises(ArityError):
        compute_Ntilde(rr[:2], rr[:2] ** 2, sigma=0.1)


def test_Ntilde_measured_on_grid():
    spec = GridSpec(1.0, 1.0 / 256)
    h = spec.spacing
    rr = geometric_radii(16 * h, 0.25)
    for fn, want in ((lambda x, y: y, 1.0), (oracle.signorini_profile_xy, 1.5)):
        f, mem = sampled(spec, fn)
        H = np.array([compute_H(f, mem, r) for r in rr])
        N, _ = compute_Ntilde(rr, H, sigma=0.1)
        assert np.max(np.abs(N - want)) < 0.05


def test_monotonicity_audit_flags_synthetic_decrease():
    rr = geometric_radii(1.0 / 16, 0.5)
    N_dec = 2.0 - 0.1 * np.arange(len(rr))       # decreasing as r grows
    viol = monotonicity_audit(rr, N_dec, c_mono=0.0, sigma=0.1, mono_tol=0.02)
    assert len(viol) == len(rr) - 1
    N_const = np.full(len(rr), 1.5)
    assert monotonicity_audit(rr, N_const, 0.0, 0.1) == []
    # any homogeneous-degree profile is exactly monotone (constant)
    assert monotonicity_audit(rr, np.full(len(rr), 0.5), 0.0, 0.1) == []


def test_rellich_plane_and_profile():
    spec = GridSpec(1.0, 1.0 / 128)
    fb = diameter_polyline(1.0)
    f, mem = sampled(spec, lambda x, y: y)
    assert rellich_residual(f, mem, fb, 0.5) < 0.02
    g, mem = sampled(spec, oracle.signorini_profile_xy)
    assert rellich_residual(g, mem, fb, 0.5) < 0.05


def example_w_setup(n):
    spec = GridSpec(0.5, 0.5 / n)
    mask = build_masks(DomainGeometry(spec)).closure
    w = ScalarField.from_function(spec, lambda x, y: y - oracle.example_u_xy(x, y), mask)
    pred = lambda x, y: (
        oracle.in_positive_set(x, y)
        & (np.hypot(x, y) <= 0.5 + 1e-12)
        & (y >= -1e-12)
    )
    mem = Membership(spec, mask, pred)
    F = oracle.fb_polyline(n=2000, r_max=0.5)
    lam = np.stack([np.linspace(-0.5, -1e-4, 1000), np.zeros(1000)], axis=1)
    return w, mem, [lam, F]


def test_rellich_decays_under_refinement():
    # the one-phase example has genuinely nonzero arc and line terms that
    # must cancel; their defect decays about linearly in h
    errs = []
    for n in (64, 128, 256):
        w, mem, fb = example_w_setup(n)
        errs.append(rellich_residual(w, mem, fb, 0.25))
    slope = np.polyfit(np.log([1 / 64, 1 / 128, 1 / 256]), np.log(errs), 1)[0]
    assert slope >= 0.7
    assert errs[2] < errs[0]
    assert errs[2] < 0.05


def test_rellich_negative_control():
    # x^2 is not harmonic; the identity must fail by a bounded-away margin
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = sampled(spec, lambda x, y: x ** 2)
    assert rellich_residual(f, mem, diameter_polyline(1.0), 0.5) > 0.3


def test_blowup_normalization_and_plane():
    spec = GridSpec(1.0, 1.0 / 128)
    f, mem = sampled(spec, lambda x, y: y)
    for r in (0.25, 0.5):
        b, eps = blowup(f, mem, r)
        bm = Membership(b.spec, b.mask, lambda x, y: (np.hypot(x, y) <= 1.0) & (y >= -1e-12))
        # normalization: H of the blowup at radius 1 is 1 (checked just inside)
        r1 = 1.0 - 2 * b.spec.spacing
        H1 = compute_H(b, bm, r1)
        assert H1 == pytest.approx(r1 ** 2, rel=2e-2)
        # plane blowup is y * sqrt(2/pi) independent of r
        X, Y = b.spec.mesh()
        m = b.mask & (np.hypot(X, Y) < 0.9)
        assert np.nanmax(np.abs(b.values[m] - Y[m] * np.sqrt(2 / np.pi))) < 2e-2
        assert eps == pytest.approx(np.sqrt(np.pi / 2), rel=1e-2)


def test_blowup_scale_invariance_of_profile():
    spec = GridSpec(1.0, 1.0 / 256)
    f, mem = sampled(spec, oracle.signorini_profile_xy)
    b1, _ = blowup(f, mem, 0.25)
    b2, _ = blowup(f, mem, 0.5)
    # compare on the coarser of the two unit grids
    X, Y = b2.spec.mesh()
    sel = b2.mask & (np.hypot(X, Y) < 0.8) & (Y > 0.05)
    from fb_lab.quadrature import bilinear

    v1 = bilinear(b1.spec, b1.values, X[sel], Y[sel])
    assert np.nanmax(np.abs(v1 - b2.values[sel])) < 2e-2


def test_homogeneity_fits():
    rr = geometric_radii(1.0 / 32, 0.5)
    # synthetic raw-integral slope: H = r^5 (paper-normalized) in n=2 -> degree 2
    deg, res = homogeneity_fit(rr, rr ** 5 / rr, n=2)
    assert deg == pytest.approx(2.0, abs=1e-12)
    spec = GridSpec(1.0, 1.0 / 256)
    f, mem = sampled(spec, lambda x, y: y)
    H = np.array([compute_H(f, mem, r) for r in rr])
    deg, _ = homogeneity_fit(rr, H)
    assert deg == pytest.approx(1.0, abs=0.02)
    g, mem = sampled(spec, oracle.signorini_profile_xy)
    H = np.array([compute_H(g, mem, r) for r in rr])
    deg, _ = homogeneity_fit(rr, H)
    assert deg == pytest.approx(1.5, abs=0.02)
    with pytest.raises(ArityError):
        homogeneity_fit(rr[:4], rr[:4] ** 2)


def test_full_report_on_profile():
    spec = GridSpec(1.0, 1.0 / 128)
    h = spec.spacing
    g, mem = sampled(spec, oracle.signorini_profile_xy)
    cfg = FrequencyConfig(radii=geometric_radii(16 * h, 0.25), sigma=0.1, c_mono=1.0)
    rep = build_report(g, mem, diameter_polyline(1.0), cfg)
    assert rep.violations == []
    assert abs(rep.N0_estimate - 1.5) < 0.05
    inner = slice(1, -1)
    ratio = rep.Hp_fd[inner] / rep.Hp_identity[inner]
    # 6% at this deliberately coarse grid; the acceptance suite pins 5%
    # at its stated resolution
    assert np.nanmax(np.abs(ratio - 1.0)) < 0.06
    assert np.all(rep.H >= 0)
    assert np.all(rep.Htilde[rep.Htilde > 0] >= 0)
