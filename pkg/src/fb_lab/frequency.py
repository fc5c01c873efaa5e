"""Frequency analysis: H, corrections E1/E2, truncated frequency, Rellich.

All spherical averages follow the convention that an average integral over a
set E inside B_r divides the raw integral by r^dim(E); the perturbation
 Htilde(r) = H(r) + int_0^r (E1 + E2) drho/rho
is accumulated by trapezoid over the report radii (the omitted tail below
the smallest radius is O(r_min^{2+3 beta}) and irrelevant at the reported
precision). The truncated frequency is

 Ntilde(r) = (r/2) d/dr ln max(Htilde(r), r^{3+sigma/10}),

computed by centered differences on log-spaced radii.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .freeboundary import FreeBoundarySet, densify_polyline
from .grid import RadiusError, ScalarField, gradient
from .quadrature import Membership, ball_integral, bilinear, circle_integral


class ArityError(ValueError):
    """Not enough radii for the requested finite-difference or fit."""


@dataclass
class FrequencyConfig:
    radii: np.ndarray
    sigma: float = 0.1
    c_mono: float = 1.0
    mono_tol: float = 0.02
    n: int = 2

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(r) <= 0):
            r = r[::-1]
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly monotone")
        self.radii = r  # ascending
        if not 0.0 < self.sigma < 0.5:
            raise ValueError("sigma must lie in (0, 1/2)")

    @property
    def trunc_exponent(self) -> float:
        return 3.0 + self.sigma / 10.0


def geometric_radii(r_min: float, r_max: float, ratio: float = 2.0 ** -0.25) -> np.ndarray:
    """Geometric sequence from r_max down to ~r_min, returned ascending."""
    out = [r_max]
    while out[-1] * ratio >= r_min * (1 - 1e-12):
        out.append(out[-1] * ratio)
    return np.asarray(out[::-1])


@dataclass
class FrequencyReport:
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    Htilde: np.ndarray
    Hp_fd: np.ndarray          # finite-difference d Htilde / dr
    Hp_identity: np.ndarray    # 2 r avg-int |Dw|^2 = 2 D / r^{n-1} / r
    Ntilde: np.ndarray
    truncation_active: np.ndarray
    rellich: np.ndarray
    sigma: float
    n: int
    violations: List = field(default_factory=list)
    N0_estimate: float = np.nan

    def row_dict(self, k):
        return {
            "r": float(self.radii[k]),
            "H": float(self.H[k]),
            "D": float(self.D[k]),
            "E1": float(self.E1[k]),
            "E2": float(self.E2[k]),
            "Htilde": float(self.Htilde[k]),
            "Hp_fd": float(self.Hp_fd[k]),
            "Hp_identity": float(self.Hp_identity[k]),
            "Ntilde": float(self.Ntilde[k]),
            "truncation_active": bool(self.truncation_active[k]),
            "rellich": float(self.rellich[k]),
        }


def _squared(w: ScalarField) -> ScalarField:
    vals = np.where(w.mask, w.values ** 2, np.nan)
    return ScalarField(w.spec, vals, w.mask.copy())


def positive_part_field(w: ScalarField, member: Membership) -> ScalarField:
    """w restricted to nodes of Omega^+ closure.

    Gradients of w are one-sided there, which matters along the free
    boundary where Dw jumps (w is continuous but u kinks across F).
    """
    X, Y = w.spec.mesh()
    node_in = member.points_inside(X.ravel(), Y.ravel()).reshape(X.shape)
    mask = w.mask & node_in
    vals = np.where(mask, w.values, np.nan)
    return ScalarField(w.spec, vals, mask)


def compute_H(w: ScalarField, member: Membership, r: float, n: int = 2) -> float:
    """H(r) = r^{1-n} integral of w^2 over the sphere portion inside Omega^+."""
    return circle_integral(_squared(w), r, member) / r ** (n - 1)


def grad_fields(w: ScalarField):
    gx, gy = gradient(w)
    mag = np.where(gx.mask, gx.values ** 2 + gy.values ** 2, np.nan)
    return gx, gy, ScalarField(w.spec, mag, gx.mask.copy())


def compute_D(w_or_grad2: ScalarField, member: Membership, r: float) -> float:
    """Raw Dirichlet integral of |Dw|^2 over B_r cap Omega^+."""
    return ball_integral(w_or_grad2, r, member)


def _fb_points(fb):
    if isinstance(fb, FreeBoundarySet):
        return fb.polylines
    if isinstance(fb, np.ndarray):
        return [fb]
    return [np.asarray(p) for p in fb]


def _outward_normals(line: np.ndarray, member: Membership, h: float):
    """Unit normals of polyline segments oriented out of Omega^+."""
    seg = np.diff(line, axis=0)
    L = np.linalg.norm(seg, axis=1)
    keep = L > 1e-300
    t = seg[keep] / L[keep][:, None]
    nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
    mids = 0.5 * (line[:-1] + line[1:])[keep]
    probe = mids + 0.5 * h * nrm
    inside = member.points_inside(probe[:, 0], probe[:, 1])
    nrm[inside] *= -1.0
    return mids, nrm, L[keep]


def compute_corrections(
    w: ScalarField, fb, r: float, member: Membership, n: int = 2, grads=None
) -> tuple:
    """(E1, E2): circle-crossing and line corrections along the free boundary.

    E1(r) = (1/r) sum over F-bar cap dB_r of w^2 (x . nu);
    E2(r) = 2 int over F-bar cap B_r of w d_nu w ds, with nu pointing out of
    Omega^+ and d_nu w sampled one grid step inside Omega^+ from the
    one-sided gradient field (Dw jumps across F, so value-difference
    quotients spanning the kink are unusable).
    """
    h = w.spec.spacing
    if grads is None:
        gxf, gyf, _ = grad_fields(positive_part_field(w, member))
    else:
        gxf, gyf = grads
    e1 = 0.0
    e2 = 0.0
    any_seg = False
    for line in _fb_points(fb):
        if len(line) < 2:
            continue
        dense = densify_polyline(line, 0.5 * h)
        mids, nrm, L = _outward_normals(dense, member, h)
        if len(mids) == 0:
            continue
        any_seg = True
        wv = bilinear(w.spec, w.values, mids[:, 0], mids[:, 1], fill=0.0)
        pxi = mids[:, 0] - h * nrm[:, 0]
        pyi = mids[:, 1] - h * nrm[:, 1]
        gxi = bilinear(w.spec, gxf.values, pxi, pyi, fill=np.nan)
        gyi = bilinear(w.spec, gyf.values, pxi, pyi, fill=np.nan)
        dnu_raw = gxi * nrm[:, 0] + gyi * nrm[:, 1]
        dnu = np.where(np.isfinite(dnu_raw), dnu_raw, 0.0)
        rr = np.hypot(mids[:, 0], mids[:, 1])
        inside = rr < r
        e2 += float(np.sum(np.where(inside, wv * dnu * L, 0.0)))
        # circle crossings of this polyline
        ra = np.hypot(dense[:-1, 0], dense[:-1, 1])
        rb = np.hypot(dense[1:, 0], dense[1:, 1])
        cross = (ra - r) * (rb - r) < 0
        for k in np.where(cross)[0]:
            a, b = dense[k], dense[k + 1]
            t = (r - ra[k]) / (rb[k] - ra[k])
            p = a + t * (b - a)
            seg = b - a
            L2 = np.linalg.norm(seg)
            if L2 < 1e-300:
                continue
            tn = seg / L2
            nu = np.array([tn[1], -tn[0]])
            if member.points_inside(p[0] + 0.5 * h * nu[0], p[1] + 0.5 * h * nu[1])[0]:
                nu = -nu
            wp = float(bilinear(w.spec, w.values, p[0], p[1], fill=0.0)[0])
            e1 += wp ** 2 * float(p @ nu)
    if not any_seg:
        return 0.0, 0.0
    return e1 / r, 2.0 * e2


def accumulate_htilde(radii: np.ndarray, H: np.ndarray, E1: np.ndarray, E2: np.ndarray):
    """Htilde over ascending radii by trapezoid of (E1+E2)/rho."""
    radii = np.asarray(radii)
    g = (np.asarray(E1) + np.asarray(E2)) / radii
    inc = np.zeros_like(radii)
    inc[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(radii))
    return np.asarray(H) + inc


def compute_Ntilde(radii: np.ndarray, Htilde: np.ndarray, sigma: float):
    """Centered log-derivative of ln max(Htilde, r^{3+sigma/10}) over ln r."""
    radii = np.asarray(radii)
    if len(radii) < 3:
        raise ArityError("Ntilde needs at least three radii")
    expo = 3.0 + sigma / 10.0
    trunc = radii ** expo
    M = np.maximum(Htilde, trunc)
    active = trunc >= Htilde
    lnM = np.log(M)
    lnr = np.log(radii)
    N = np.full(len(radii), np.nan)
    N[1:-1] = 0.5 * (lnM[2:] - lnM[:-2]) / (lnr[2:] - lnr[:-2])
    N[0] = 0.5 * (lnM[1] - lnM[0]) / (lnr[1] - lnr[0])
    N[-1] = 0.5 * (lnM[-1] - lnM[-2]) / (lnr[-1] - lnr[-2])
    return N, active


def monotonicity_audit(
    radii: np.ndarray, Ntilde: np.ndarray, c_mono: float, sigma: float, mono_tol: float = 0.02
):
    """Pairs of consecutive radii where (1 + C r^{sigma/10}) Ntilde decreases."""
    radii = np.asarray(radii)
    g = (1.0 + c_mono * radii ** (sigma / 10.0)) * np.asarray(Ntilde)
    viol = []
    for k in range(len(radii) - 1):
        if not (np.isfinite(g[k]) and np.isfinite(g[k + 1])):
            continue
        if g[k + 1] < g[k] - mono_tol:
            viol.append((float(radii[k]), float(radii[k + 1]), float(g[k] - g[k + 1])))
    return viol


def rellich_residual(
    w: ScalarField, member: Membership, fb, r: float, n: int = 2
) -> float:
    """Relative defect of the integrated Rellich identity on B_r cap Omega^+."""
    wp = positive_part_field(w, member)
    gx, gy, grad2 = grad_fields(wp)
    dir_int = ball_integral(grad2, r, member)
    if dir_int < 1e-14:
        raise ZeroDivisionError("Dirichlet integral below guard in rellich_residual")
    X, Y = w.spec.mesh()
    rr = np.hypot(X, Y)
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = (X * gx.filled(np.nan) + Y * gy.filled(np.nan)) / np.where(rr > 0, rr, 1.0)
    arc_dens = np.where(gx.mask, grad2.values - 2.0 * radial ** 2, np.nan)
    arc_field = ScalarField(w.spec, arc_dens, gx.mask.copy())
    arc = r * circle_integral(arc_field, r, member)
    line = 0.0
    if fb is not None:
        h = w.spec.spacing
        for pl in _fb_points(fb):
            if len(pl) < 2:
                continue
            dense = densify_polyline(pl, 0.5 * h)
            mids, nrm, L = _outward_normals(dense, member, h)
            if len(mids) == 0:
                continue
            rs = np.hypot(mids[:, 0], mids[:, 1])
            inside = rs < r
            sample = lambda f, px, py: bilinear(w.spec, f, px, py, fill=np.nan)
            # gradients one step into Omega^+ to stay clear of the cut
            pxi = mids[:, 0] - 1.0 * h * nrm[:, 0]
            pyi = mids[:, 1] - 1.0 * h * nrm[:, 1]
            gxi = sample(gx.values, pxi, pyi)
            gyi = sample(gy.values, pxi, pyi)
            ok = np.isfinite(gxi) & np.isfinite(gyi) & inside
            g2 = gxi ** 2 + gyi ** 2
            xdotnu = mids[:, 0] * nrm[:, 0] + mids[:, 1] * nrm[:, 1]
            gdotx = gxi * mids[:, 0] + gyi * mids[:, 1]
            gdotnu = gxi * nrm[:, 0] + gyi * nrm[:, 1]
            dens = g2 * xdotnu - 2.0 * gdotx * gdotnu
            line += float(np.sum(np.where(ok, dens * L, 0.0)))
    lhs = (n - 2) * dir_int
    rhs = arc + line
    return abs(lhs - rhs) / dir_int


def blowup(w: ScalarField, member: Membership, r: float, H_r: Optional[float] = None):
    """Rescaled field w_r(x) = w(r x) / sqrt(H(r)) on the unit grid.

    Returns (field, eps_r) with eps_r = sqrt(H(r)) / r.
    """
    spec = w.spec
    h = spec.spacing
    cells = int(round(r / h))
    if cells < 16:
        raise RadiusError("blowup needs r >= 16h to build a valid unit grid")
    if H_r is None:
        H_r = compute_H(w, member, r)
    if H_r <= 0.0:
        raise ZeroDivisionError("H(r) <= 0: degenerate blowup scale")
    from .grid import GridSpec

    out_spec = GridSpec(half_width=1.0, spacing=1.0 / cells, shape=spec.shape)
    X, Y = out_spec.mesh()
    px, py = r * X.ravel(), r * Y.ravel()
    inside = member.points_inside(px, py).reshape(X.shape)
    vals = bilinear(spec, w.values, px, py, fill=np.nan).reshape(X.shape)
    scale = np.sqrt(H_r)
    vals = np.where(inside & np.isfinite(vals), vals / scale, np.nan)
    mask = inside & np.isfinite(vals)
    field = ScalarField(out_spec, vals, mask)
    return field, scale / r


def homogeneity_fit(radii: np.ndarray, H: np.ndarray, n: int = 2):
    """(degree, residual) from the log-log slope of the raw sphere integral.

    The raw integral r^{n-1} H(r) of a d-homogeneous function scales like
    r^{2d + n - 1}, so degree = (slope - (n-1)) / 2.
    """
    radii = np.asarray(radii, dtype=float)
    H = np.asarray(H, dtype=float)
    good = H > 0
    if good.sum() < 5:
        raise ArityError("homogeneity_fit needs at least five radii with H > 0")
    lx = np.log(radii[good])
    ly = np.log(H[good] * radii[good] ** (n - 1))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fit = A @ coef
    rms = float(np.sqrt(np.mean((fit - ly) ** 2)))
    degree = (coef[0] - (n - 1)) / 2.0
    return float(degree), rms


def build_report(
    w: ScalarField, member: Membership, fb, cfg: FrequencyConfig
) -> FrequencyReport:
    radii = cfg.radii
    n = cfg.n
    H = np.zeros(len(radii))
    D = np.zeros(len(radii))
    E1 = np.zeros(len(radii))
    E2 = np.zeros(len(radii))
    rel = np.zeros(len(radii))
    w2 = _squared(w)
    gx, gy, grad2 = grad_fields(positive_part_field(w, member))
    for k, r in enumerate(radii):
        H[k] = circle_integral(w2, r, member) / r ** (n - 1)
        D[k] = ball_integral(grad2, r, member)
        if fb is not None:
            E1[k], E2[k] = compute_corrections(w, fb, r, member, n=n, grads=(gx, gy))
        try:
            rel[k] = rellich_residual(w, member, fb, r, n=n)
        except ZeroDivisionError:
            rel[k] = np.nan
    Ht = accumulate_htilde(radii, H, E1, E2)
    Nt, active = compute_Ntilde(radii, Ht, cfg.sigma)
    hp_fd = np.full(len(radii), np.nan)
    lnr = np.log(radii)
    lnH = np.log(np.maximum(Ht, 1e-300))
    hp_fd[1:-1] = Ht[1:-1] * (lnH[2:] - lnH[:-2]) / (lnr[2:] - lnr[:-2]) / radii[1:-1]
    hp_id = 2.0 * D / radii ** (n - 1)
    viol = monotonicity_audit(radii, Nt, cfg.c_mono, cfg.sigma, cfg.mono_tol)
    small = np.argsort(radii)[: max(3, len(radii) // 4)]
    n0 = float(np.nanmean(Nt[small]))
    return FrequencyReport(
        radii=radii,
        H=H,
        D=D,
        E1=E1,
        E2=E2,
        Htilde=Ht,
        Hp_fd=hp_fd,
        Hp_identity=hp_id,
        Ntilde=Nt,
        truncation_active=active,
        rellich=rel,
        sigma=cfg.sigma,
        n=n,
        violations=viol,
        N0_estimate=n0,
    )
