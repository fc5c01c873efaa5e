"""Grid fields, stencils, gradients, dumps."""
import numpy as np
import pytest

from fb_lab import oracle
from fb_lab.grid import (
    CoefficientField,
    DomainGeometry,
    GeometryError,
    GridSpec,
    ScalarField,
    apply_operator,
    build_masks,
    dump_field,
    gradient,
    load_field,
)


def half_disk_spec(n, R=0.5):
    return GridSpec(half_width=R, spacing=R / n, shape="half_disk")


def closure_mask(spec):
    m = build_masks(DomainGeometry(spec))
    return m.closure


def test_spec_invariants():
    with pytest.raises(ValueError):
        GridSpec(half_width=0.5, spacing=-0.1)
    with pytest.raises(ValueError):
        GridSpec(half_width=0.5, spacing=0.5 / 8)  # fewer than 16 cells
    with pytest.raises(ValueError):
        GridSpec(half_width=0.5, spacing=0.003)  # not an integer multiple
    s = half_disk_spec(64)
    assert s.nx == 129 and s.ny == 65
    # node coordinates are exact multiples of h
    assert s.x()[s.n] == 0.0
    assert np.all(s.x() == (np.arange(s.nx) - s.n) * s.spacing)


def test_operator_kernel_on_linear_and_quadratic():
    spec = half_disk_spec(32)
    mask = closure_mask(spec)
    coeff = CoefficientField.identity(spec, mask=mask)
    for fn in (lambda x, y: y, lambda x, y: x ** 2 - y ** 2, lambda x, y: 3 * x + 4 * y + 1):
        u = ScalarField.from_function(spec, fn, mask)
        lu = apply_operator(u, coeff)
        assert lu.mask.any()
        assert np.max(np.abs(lu.values[lu.mask])) < 1e-10


def test_operator_second_order_on_homogeneous_profile():
    # residual of the 3/2-homogeneous harmonic profile decays like h^2 away from 0
    errs = []
    hs = []
    for n in (32, 64, 128):
        spec = half_disk_spec(n)
        mask = closure_mask(spec)
        coeff = CoefficientField.identity(spec, mask=mask)
        u = ScalarField.from_function(spec, oracle.signorini_profile_xy, mask)
        lu = apply_operator(u, coeff)
        X, Y = spec.mesh()
        probe = lu.mask & (np.hypot(X, Y) > 0.2) & (np.hypot(X, Y) < 0.4)
        errs.append(np.max(np.abs(lu.values[probe])))
        hs.append(spec.spacing)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) <= 0.3


def test_operator_mask_too_thin():
    spec = half_disk_spec(32)
    mask = np.zeros((spec.ny, spec.nx), dtype=bool)
    mask[3, :] = True  # a single line has no 5-point interior
    u = ScalarField.from_function(spec, lambda x, y: x, mask)
    coeff = CoefficientField.identity(spec, mask=mask)
    with pytest.raises(GeometryError):
        apply_operator(u, coeff)


def test_gradient_exact_on_affine():
    spec = half_disk_spec(32)
    mask = closure_mask(spec)
    u = ScalarField.from_function(spec, lambda x, y: 3 * x + 4 * y, mask)
    gx, gy = gradient(u)
    assert np.allclose(gx.values[gx.mask], 3.0, atol=1e-11)
    assert np.allclose(gy.values[gy.mask], 4.0, atol=1e-11)


def test_gradient_modulus_of_height():
    spec = half_disk_spec(32)
    mask = closure_mask(spec)
    u = ScalarField.from_function(spec, lambda x, y: y, mask)
    gx, gy = gradient(u)
    mod = np.hypot(gx.values[gx.mask], gy.values[gy.mask])
    assert np.allclose(mod, 1.0, atol=1e-11)


def test_gradient_matches_q_along_fb():
    # |Du| of the sampled example near F matches the Q formula to O(sqrt(h))
    spec = half_disk_spec(256)
    mask = closure_mask(spec)
    u = ScalarField.from_function(spec, oracle.example_u_xy, mask)
    gx, gy = gradient(u)
    pts = oracle.fb_polyline(n=30, r_max=0.4, r_min=0.05)
    from fb_lab.quadrature import bilinear

    # sample just inside the positive set along the inward normal
    th = oracle.example_fb(np.hypot(pts[:, 0], pts[:, 1]))
    h = spec.spacing
    nx_, ny_ = -np.sin(th), np.cos(th)  # roughly inward (towards larger theta)
    px = pts[:, 0] + 2 * h * nx_
    py = pts[:, 1] + 2 * h * ny_
    gxv = bilinear(spec, gx.values, px, py)
    gyv = bilinear(spec, gy.values, px, py)
    mod = np.hypot(gxv, gyv)
    q = oracle.example_Q(np.hypot(pts[:, 0], pts[:, 1]))
    assert np.max(np.abs(mod - q)) < 3.0 * np.sqrt(h)


def test_coefficient_validation():
    spec = half_disk_spec(32)
    mask = closure_mask(spec)
    with pytest.raises(ValueError):
        CoefficientField.identity(spec, q=0.0, mask=mask)
    cf = CoefficientField.identity(spec, q=2.0, mask=mask)
    assert cf.is_identity
    bad_a12 = ScalarField.from_function(spec, lambda x, y: 5.0 * np.ones_like(x), mask)
    with pytest.raises(ValueError):
        CoefficientField(a11=cf.a11, a12=bad_a12, a22=cf.a22, Q=cf.Q, ellipticity=1.0)


def test_graph_domain_norm_check():
    spec = GridSpec(half_width=0.5, spacing=0.5 / 32, shape="graph_domain")
    DomainGeometry(spec, g=lambda x: 0.2 * x ** 2)  # fine
    with pytest.raises(GeometryError):
        DomainGeometry(spec, g=lambda x: 0.1 + 0.2 * x ** 2)  # g(0) != 0
    with pytest.raises(GeometryError):
        DomainGeometry(spec, g=lambda x: 0.5 * x)  # g'(0) != 0


def test_dump_roundtrip_bit_exact():
    spec = half_disk_spec(16, R=0.5)
    mask = closure_mask(spec)
    u = ScalarField.from_function(spec, oracle.example_u_xy, mask)
    text = dump_field(u, "u")
    v, name = load_field(text)
    assert name == "u"
    assert np.array_equal(v.mask, u.mask)
    assert np.array_equal(v.values[v.mask], u.values[u.mask])
    assert dump_field(v, "u") == text


def test_determinism_same_inputs_same_bits():
    spec = half_disk_spec(32)
    mask = closure_mask(spec)
    coeff = CoefficientField.identity(spec, mask=mask)
    u = ScalarField.from_function(spec, oracle.example_u_xy, mask)
    a = apply_operator(u, coeff)
    b = apply_operator(u, coeff)
    assert np.array_equal(a.values[a.mask], b.values[b.mask])
