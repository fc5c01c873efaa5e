"""Flatness records, exponent fits, Harnack dichotomy, barrier check."""
import numpy as np
import pytest

from fb_lab import oracle
from fb_lab.freeboundary import FreeBoundarySet
from fb_lab.grid import DomainGeometry, GridSpec, ScalarField, build_masks
from fb_lab.regularity import (
    FlatnessRecord,
    FrameError,
    HypothesisError,
    InsufficientScales,
    fb_exponent_fit,
    flatness_decay_fit,
    harnack_dichotomy_check,
    measure_flatness,
    measured_trap,
    nondegeneracy_check,
)

E2 = (0.0, 1.0)
ORIGIN = (0.0, 0.0)


def field_on_half_disk(n, fn, R=0.5):
    spec = GridSpec(R, R / n)
    mask = build_masks(DomainGeometry(spec)).closure
    return ScalarField.from_function(spec, fn, mask)


def test_flatness_of_plane_is_zero():
    u = field_on_half_disk(64, lambda x, y: y)
    for r in (0.1, 0.25):
        rec = measure_flatness(u, ORIGIN, E2, r)
        assert rec.epsilon < 1e-12


def test_flatness_of_shifted_plane():
    delta = 0.04
    u = field_on_half_disk(64, lambda x, y: np.maximum(y - delta, 0.0))
    rec = measure_flatness(u, ORIGIN, E2, 0.25)
    # upper deviation vanishes; lower deviation = delta at nodes just above the slab edge
    assert rec.epsilon == pytest.approx(delta / 0.25, rel=0.1)


def test_flatness_of_example_scales_like_sqrt_r():
    u = field_on_half_disk(256, oracle.example_u_xy)
    recs = [measure_flatness(u, ORIGIN, E2, r) for r in (0.25, 0.125, 0.0625, 0.03125)]
    fit = flatness_decay_fit(recs, beta_min=0.3)
    assert 0.4 <= fit.exponent <= 0.6
    assert fit.passed


def test_flatness_monotone_in_function_argument():
    # u <= v pointwise implies the upper deviation of u dominates that of v
    rng = np.random.default_rng(11)
    spec = GridSpec(0.5, 0.5 / 32)
    mask = build_masks(DomainGeometry(spec)).closure
    X, Y = spec.mesh()
    for _ in range(10):
        base = np.maximum(Y - 0.1 * rng.uniform(), 0.0)
        bump = rng.uniform(0.0, 0.05) * np.sin(3 * X) ** 2
        u = ScalarField(spec, np.where(mask, base, np.nan), mask.copy())
        v = ScalarField(spec, np.where(mask, base + bump, np.nan), mask.copy())
        au, _ = measured_trap(u, ORIGIN, E2, 0.25)
        av, _ = measured_trap(v, ORIGIN, E2, 0.25)
        # upper deviation measures (u - y)+ : adding a bump raises it
        assert av >= au - 1e-12


def test_frame_error_without_detachment():
    u = field_on_half_disk(64, oracle.example_u_xy)
    line = np.array([[0.3, 0.1], [0.4, 0.2]])
    fbset = FreeBoundarySet([line], [np.zeros(2, dtype=bool)], u.spec.spacing)
    with pytest.raises(FrameError):
        measure_flatness(u, ORIGIN, E2, 0.25, fbset=fbset)


def test_decay_fit_synthetic():
    recs = [FlatnessRecord(r, np.sqrt(r)) for r in (0.4, 0.2, 0.1, 0.05)]
    fit = flatness_decay_fit(recs)
    assert fit.exponent == pytest.approx(0.5, abs=1e-12)
    assert fit.passed
    flat = [FlatnessRecord(r, 0.3) for r in (0.4, 0.2, 0.1, 0.05)]
    fit2 = flatness_decay_fit(flat, beta_min=0.3)
    assert fit2.exponent == pytest.approx(0.0, abs=1e-12)
    assert not fit2.passed
    with pytest.raises(InsufficientScales):
        flatness_decay_fit(recs[:3])


def synthetic_fb(expo, n=400, xmax=0.4, h=1 / 256):
    x = np.linspace(1e-4, xmax, n)
    line = np.stack([x, x ** expo], axis=1)
    return FreeBoundarySet([line], [np.zeros(n, dtype=bool)], h)


def test_fb_exponent_synthetic_three_halves():
    fb = synthetic_fb(1.5)
    fit = fb_exponent_fit(fb, ORIGIN, window=(8 / 256, 0.125))
    assert fit.exponent == pytest.approx(1.5, abs=1e-6)
    assert fit.residual < 1e-9


def test_fb_exponent_straight_line_flagged():
    fb = synthetic_fb(1.0)
    fit = fb_exponent_fit(fb, ORIGIN, window=(8 / 256, 0.125))
    assert fit.exponent == pytest.approx(1.0, abs=1e-6)
    assert fit.exponent < 1.4  # below the C^{1,1/2} detachment target


def test_fb_exponent_analytic_example_polyline():
    pts = oracle.fb_polyline(n=4000, r_max=0.5)
    fb = FreeBoundarySet([pts], [np.zeros(len(pts), dtype=bool)], 1 / 512)
    fit = fb_exponent_fit(fb, ORIGIN, window=(8 / 512, 0.125))
    assert 1.4 <= fit.exponent <= 1.6


def test_harnack_plane_prefers_upper():
    u = field_on_half_disk(64, lambda x, y: y)
    out = harnack_dichotomy_check(u, a=0.02, b=0.02, r=0.25, theta=0.01)
    assert out == "upper_improved"


def test_harnack_lower_extremal():
    b = 0.03
    u = field_on_half_disk(64, lambda x, y: np.maximum(y - b, 0.0))
    out = harnack_dichotomy_check(u, a=0.5 * b, b=b, r=0.25, theta=0.01)
    # u is extremal for the lower trap; the upper bound improves
    assert out == "upper_improved"


def test_harnack_hypothesis_error():
    u = field_on_half_disk(64, lambda x, y: 2 * y)
    with pytest.raises(HypothesisError):
        harnack_dichotomy_check(u, a=0.01, b=0.01, r=0.25, theta=0.01)


def test_harnack_example_at_quarter():
    u = field_on_half_disk(512, oracle.example_u_xy)
    r = 0.25
    a, b = measured_trap(u, ORIGIN, E2, r)
    a = max(a, 1e-6)
    b = max(b, a)
    out = harnack_dichotomy_check(u, a=a, b=b, r=r, theta=0.01)
    assert out != "violation"


def test_nondegeneracy_true_on_supersolution():
    spec = GridSpec(1.0, 1.0 / 128)
    mask = build_masks(DomainGeometry(spec)).closure
    eta = 0.2
    u = ScalarField.from_function(spec, lambda x, y: (1 + eta) * y, mask)
    ok, where = nondegeneracy_check(u, q0=1.0, eta=eta, eps=spec.spacing)
    assert ok and where is None


def test_nondegeneracy_hypothesis_fails_on_cone():
    spec = GridSpec(1.0, 1.0 / 128)
    mask = build_masks(DomainGeometry(spec)).closure
    eps = 4 * spec.spacing
    u = ScalarField.from_function(spec, lambda x, y: np.maximum(y - eps, 0.0), mask)
    with pytest.raises(HypothesisError):
        nondegeneracy_check(u, q0=1.0, eta=0.1, eps=eps)


def test_nondegeneracy_touching_detected():
    # a non-solution hugging the cone satisfies the hypothesis but is caught
    # by the sliding barrier (the barrier exceeds it near y = eps)
    spec = GridSpec(1.0, 1.0 / 128)
    mask = build_masks(DomainGeometry(spec)).closure
    eta = 0.2
    eps = 4 * spec.spacing
    u = ScalarField.from_function(
        spec, lambda x, y: 1.2 * np.maximum(y - eps, 0.0) + 1e-3 * y, mask
    )
    ok, where = nondegeneracy_check(u, q0=1.0, eta=eta, eps=eps)
    assert not ok and where is not None
