"""Flatness, decay fits, detachment exponents, comparison and barrier checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .freeboundary import FreeBoundarySet
from .grid import GeometryError, GridSpec, ScalarField


class FrameError(ValueError):
    """Flatness frame center not on the thin boundary of the contact set."""


class HypothesisError(ValueError):
    """Comparison/barrier hypothesis not satisfied by the input field."""


class InsufficientScales(ValueError):
    """Too few scales or vertices for the requested fit."""


@dataclass(frozen=True)
class FlatnessRecord:
    r: float
    epsilon: float


@dataclass
class RegularityFit:
    points: np.ndarray          # (k, 2) array of (ln scale, ln deviation)
    exponent: float
    residual: float
    window: tuple
    passed: Optional[bool] = None


def _signed_height(u: ScalarField, center, direction):
    X, Y = u.spec.mesh()
    ex, ey = direction
    nrm = float(np.hypot(ex, ey))
    return ((X - center[0]) * ex + (Y - center[1]) * ey) / nrm


def _positivity_closure(u: ScalarField):
    tau = 1e-12 * u.max_abs()
    pos = u.mask & (u.filled(-1.0) > tau)
    grow = np.zeros_like(pos)
    grow[1:, :] |= pos[:-1, :]
    grow[:-1, :] |= pos[1:, :]
    grow[:, 1:] |= pos[:, :-1]
    grow[:, :-1] |= pos[:, 1:]
    return pos | (grow & u.mask)


def measured_trap(u: ScalarField, center, direction, r):
    """Smallest (a, b) with (x.e + a)_+ >= u >= (x.e - b)_+ on B_r."""
    s = _signed_height(u, center, direction)
    X, Y = u.spec.mesh()
    ball = (np.hypot(X - center[0], Y - center[1]) <= r) & u.mask
    if not ball.any():
        raise GeometryError("no nodes in the flatness ball")
    v = u.filled(0.0)
    upper = float(np.max(np.where(ball, v - s, -np.inf)))
    closure = _positivity_closure(u)
    lower_dom = ball & closure
    lower = float(np.max(np.where(lower_dom, s - v, -np.inf))) if lower_dom.any() else 0.0
    return max(upper, 0.0), max(lower, 0.0)


def measure_flatness(
    u: ScalarField,
    center,
    direction,
    r,
    fbset: Optional[FreeBoundarySet] = None,
) -> FlatnessRecord:
    """Scale-normalized trap width of u around the plane profile at `center`.

    epsilon = max(upper deviation over the ball, lower deviation over the
    closure of the positivity set) / r. If a free boundary set is supplied,
    the center must lie within 2h of one of its detachment points.
    """
    h = u.spec.spacing
    if r < 8 * h:
        raise ValueError("flatness scale below 8h")
    if fbset is not None:
        det = fbset.detachment_points()
        if len(det) == 0:
            raise FrameError("free boundary has no detachment point")
        d = np.min(np.hypot(det[:, 0] - center[0], det[:, 1] - center[1]))
        if d > 2 * h:
            raise FrameError(f"frame center {d / h:.2f}h away from the thin boundary")
    a, b = measured_trap(u, center, direction, r)
    return FlatnessRecord(r=float(r), epsilon=float(max(a, b) / r))


def flatness_decay_fit(records: Sequence[FlatnessRecord], beta_min: float = 0.3) -> RegularityFit:
    """Least-squares slope of ln epsilon against ln r over >= 4 dyadic scales."""
    if len(records) < 4:
        raise InsufficientScales("flatness decay fit needs at least 4 scales")
    rr = np.array([rec.r for rec in records])
    ee = np.array([max(rec.epsilon, 1e-300) for rec in records])
    lx, ly = np.log(rr), np.log(ee)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    beta = float(coef[0])
    return RegularityFit(
        points=np.stack([lx, ly], axis=1),
        exponent=beta,
        residual=resid,
        window=(float(rr.min()), float(rr.max())),
        passed=bool(beta >= beta_min),
    )


def fb_exponent_fit(
    fb: FreeBoundarySet,
    detachment,
    window: Optional[tuple] = None,
    spacing: Optional[float] = None,
) -> RegularityFit:
    """Fit ln(height above Z) against ln|x - x_det| on the detached side."""
    h = spacing or fb.spacing
    if h <= 0:
        raise ValueError("need a positive grid spacing for the fit window")
    pts = fb.detached_vertices()
    if len(pts) == 0:
        raise GeometryError("no detached free boundary vertices")
    dx = pts[:, 0] - detachment[0]
    hh = pts[:, 1]
    if window is None:
        window = (8 * h, max(np.max(np.abs(dx)) / 2, 9 * h))
    sel = (np.abs(dx) >= window[0]) & (np.abs(dx) <= window[1]) & (hh > 0)
    if sel.sum() < 6:
        raise InsufficientScales("need >= 6 detached vertices inside the window")
    lx = np.log(np.abs(dx[sel]))
    ly = np.log(hh[sel])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return RegularityFit(
        points=np.stack([lx, ly], axis=1),
        exponent=float(coef[0]),
        residual=resid,
        window=window,
    )


def harnack_dichotomy_check(u: ScalarField, a, b, r, theta, center=(0.0, 0.0), direction=(0.0, 1.0)):
    """Which side of the Harnack alternative improves on the half ball.

    Requires the trap (x.e + a)_+ >= u >= (x.e - b)_+ on B_r with
    0 < a <= b; tests both improved traps on B_{r/2} with margin theta*(a+b)/2
    and returns "upper_improved", "lower_improved" or "violation".
    """
    if not (0 < a <= b):
        raise HypothesisError("need 0 < a <= b")
    slack = 1e-12 * max(1.0, u.max_abs())
    ma, mb = measured_trap(u, center, direction, r)
    if ma > a + slack or mb > b + slack:
        raise HypothesisError(
            f"trap hypothesis fails on B_r: measured ({ma:.3e}, {mb:.3e}) vs ({a:.3e}, {b:.3e})"
        )
    c = 0.5 * (a + b)
    ua, ub = measured_trap(u, center, direction, r / 2)
    if ua <= a - theta * c + slack:
        return "upper_improved"
    if ub <= b - theta * c + slack:
        return "lower_improved"
    return "violation"


def _parabola_domain_solve(u: ScalarField, eps):
    """Harmonic barrier on the parabola domain {1/2 > y > 8 eps x^2, |x| < 1/2}."""
    spec = u.spec
    h = spec.spacing
    if spec.half_width < 0.5 + 2 * h:
        raise GeometryError("grid too small to host the barrier domain")
    X, Y = spec.mesh()
    inside = (np.abs(X) < 0.5) & (Y < 0.5) & (Y > 8 * eps * X ** 2)
    bnd = np.zeros_like(inside)
    bnd[1:, :] |= inside[:-1, :]
    bnd[:-1, :] |= inside[1:, :]
    bnd[:, 1:] |= inside[:, :-1]
    bnd[:, :-1] |= inside[:, 1:]
    bnd &= ~inside
    gdat = np.where(bnd, Y - 8 * eps * X ** 2, 0.0)
    idx = -np.ones(X.shape, dtype=np.int64)
    J, I = np.where(inside)
    idx[J, I] = np.arange(len(J))
    rows, cols, data = [], [], []
    bb = np.zeros(len(J))
    k = idx[J, I]
    rows.append(k)
    cols.append(k)
    data.append(4.0 * np.ones(len(J)))
    ny, nx = X.shape
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        Jn, In = J + dj, I + di
        ok = (Jn >= 0) & (Jn < ny) & (In >= 0) & (In < nx)
        Jc, Ic = np.clip(Jn, 0, ny - 1), np.clip(In, 0, nx - 1)
        nb_in = ok & inside[Jc, Ic]
        rows.append(k[nb_in])
        cols.append(idx[Jc[nb_in], Ic[nb_in]])
        data.append(-np.ones(nb_in.sum()))
        sel = ok & ~nb_in
        np.add.at(bb, k[sel], gdat[Jc[sel], Ic[sel]])
    K = sps.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(J), len(J)),
    )
    phi = spla.splu(K.tocsc()).solve(bb)
    out = np.full(X.shape, np.nan)
    out[J, I] = phi
    out[bnd] = gdat[bnd]
    return out, inside | bnd


def nondegeneracy_check(u: ScalarField, q0: float, eta: float, eps: float):
    """Sliding-barrier nondegeneracy test at the origin.

    Hypothesis: u > (q0 + eta)(y - eps)_+ on the grid; the harmonic barrier
    on the parabola domain is slid down from t = eps to 0 in steps of h. A
    touching event returns (False, location); otherwise the nontangential
    slope of u at 0 is compared against q0 and (slope > q0, None) is
    returned.
    """
    spec = u.spec
    h = spec.spacing
    X, Y = spec.mesh()
    cone = (q0 + eta) * np.maximum(Y - eps, 0.0)
    m = u.mask & (np.hypot(X, Y) <= spec.half_width)
    strict = u.filled(0.0) >= cone
    need = m & (cone > 0)
    if need.any() and not np.all(strict[need] & (u.filled(0.0)[need] > cone[need])):
        raise HypothesisError("u is not strictly above the cone (q0+eta)(y-eps)_+")
    phi0, dom = _parabola_domain_solve(u, eps)
    from .quadrature import bilinear

    ts = np.arange(np.floor(eps / h), -1, -1) * h
    uv = u.filled(np.nan)
    for t in ts:
        # psi_t(x) = (1+eta/2) phi0(x - t e_y), defined where the shift lands in the domain
        px, py = X[m], Y[m] - t
        vals = bilinear(spec, np.where(dom, phi0, np.nan), px, py, fill=np.nan)
        psi = (1.0 + 0.5 * eta) * vals
        good = np.isfinite(psi)
        uu = uv[m]
        viol = good & (uu + 1e-10 < psi)
        if viol.any():
            k = np.argmax(viol)
            return False, (float(px[k]), float(py[k] + t))
    i0 = spec.n
    slope = (4.0 * uv[1, i0] - uv[2, i0]) / (2.0 * h)
    return bool(slope > q0), None
