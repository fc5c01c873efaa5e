"""Closed-form reference solutions.

Two explicit profiles drive most of the test corpus:

* the optimal one-phase example ``u = (r sin(theta) - r^{3/2} cos(3 theta/2))_+``
  on the upper half plane, whose free boundary ``F = {sin(theta) =
  sqrt(r) cos(3 theta/2)}`` detaches from the floor at the origin like
  ``y ~ x^{3/2}``, together with the gradient-modulus field Q that makes it a
  one-phase solution;
* the 3/2-homogeneous thin-obstacle profile ``w = r^{3/2} cos(3 theta/2)``,
  harmonic on the upper half disk, in contact on the ray ``theta = pi`` and
  flux-free on ``theta = 0``.

Everything here is a stateless pure function of position; fields on grids are
built by sampling these.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Q_FLOOR = 0.2
EXTENSION_SLOPE = 0.0  # radial extension needs no extra modulation, see example_Q


def example_u(r, theta):
    """One-phase example value at polar (r, theta), clipped to its positive part.

    The floor rays theta = 0 and theta = pi are snapped to exactly zero (the
    analytic value there) to avoid float roundoff of cos(3 pi / 2).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    vals = np.maximum(example_u_raw(r, theta), 0.0)
    on_floor = (np.abs(theta) <= 1e-12) | (np.abs(theta - np.pi) <= 1e-12)
    return np.where(on_floor, 0.0, vals)


def example_u_raw(r, theta):
    """Unclipped expression r sin(theta) - r^{3/2} cos(3 theta / 2)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return r * np.sin(theta) - r ** 1.5 * np.cos(1.5 * theta)


def example_u_xy(x, y):
    """Cartesian wrapper for example_u."""
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    return example_u(r, theta)


def in_positive_set(x, y):
    """True where the example solution is strictly positive."""
    return example_u_raw(np.hypot(x, y), np.arctan2(y, x)) > 0.0


def example_grad_xy(x, y):
    """Analytic gradient of the (unclipped) example expression.

    With z = x + iy, u = Im z - Re z^{3/2}, so Du = (-Re((3/2) z^{1/2}),
    1 + (3/2) Im z^{1/2}).
    """
    z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
    zr = np.sqrt(z)
    return -1.5 * zr.real, 1.0 + 1.5 * zr.imag


class FbRootError(RuntimeError):
    """Newton iteration for the free boundary angle failed to converge."""


def example_fb(r, tol=1e-12, max_steps=50):
    """Free boundary angle theta(r) solving sin(theta) = sqrt(r) cos(3 theta/2).

    Newton iteration seeded at theta0 = sqrt(r); the root lies in (0, pi/3)
    for r <= 1/2. Works on scalars and arrays.
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r <= 0.0):
        raise ValueError("example_fb requires r > 0")
    sq = np.sqrt(r)
    th = sq.copy()
    for _ in range(max_steps):
        f = np.sin(th) - sq * np.cos(1.5 * th)
        fp = np.cos(th) + 1.5 * sq * np.sin(1.5 * th)
        step = f / fp
        th = th - step
        if np.max(np.abs(np.sin(th) - sq * np.cos(1.5 * th))) < tol:
            break
    else:
        raise FbRootError("example_fb: no convergence in %d steps" % max_steps)
    if np.any(th <= 0.0) or np.any(th >= np.pi / 3 + 1e-9):
        raise FbRootError("example_fb: root left the bracket (0, pi/3)")
    return float(th[0]) if scalar else th


def fb_polyline(n=2000, r_max=0.5, r_min=1e-6):
    """Sampled analytic free boundary as an (n, 2) array of (x, y) points.

    Geometrically spaced radii resolve the detachment region near the origin.
    """
    rr = np.geomspace(r_min, r_max, n)
    th = example_fb(rr)
    return np.stack([rr * np.cos(th), rr * np.sin(th)], axis=1)


def q_on_fb(r):
    """|Du| on the free boundary at radius r: sqrt(1 + 9r/4 + 3 sqrt(r) sin(theta/2)).

    The angular term written on F equals 3 sin(theta) sin(theta/2) / cos(3 theta/2)
    with theta = example_fb(r).
    """
    r = np.asarray(r, dtype=float)
    th = example_fb(np.maximum(r, 1e-300))
    return np.sqrt(1.0 + 2.25 * r + 3.0 * np.sqrt(r) * np.sin(0.5 * th))


def example_Q(r, theta=None):
    """Prescribed gradient bound Q at polar (r, theta).

    On F the value is exactly |Du|; off F we extend radially, i.e.
    Q(r, theta) = |Du| evaluated at the free boundary point of the same
    radius. The radial extension is Lipschitz on the half disk, equals the
    formula on F, and stays below |Du| on the contact ray theta = pi
    (where |Du| = 1 + (3/2) sqrt(r)), so the analytic example remains a
    stable solution of the one-phase problem. Values are floored at
    Q_FLOOR = 0.2; the floor is never active for r <= 1/2.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("example_Q requires r >= 0")
    rr = np.maximum(r, 1e-12)
    q = q_on_fb(rr)
    q = np.where(np.asarray(r) < 1e-12, 1.0, q)
    q = np.maximum(q, Q_FLOOR)
    if np.any(~np.isfinite(q)):
        raise FloatingPointError("example_Q: non-finite value")
    return q if q.ndim else float(q)


def example_Q_xy(x, y):
    """Cartesian wrapper for example_Q."""
    return example_Q(np.hypot(x, y))


@dataclass(frozen=True)
class ExampleEval:
    """Example solution evaluated at one polar point."""

    r: float
    theta: float
    u: float
    in_positive_set: bool
    Q: float


def evaluate_example(r, theta):
    u = float(example_u(r, theta))
    return ExampleEval(
        r=float(r),
        theta=float(theta),
        u=u,
        in_positive_set=bool(example_u_raw(r, theta) > 0.0),
        Q=float(example_Q(r)),
    )


def signorini_profile(r, theta):
    """Canonical 3/2-homogeneous Signorini solution w = r^{3/2} cos(3 theta/2)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return r ** 1.5 * np.cos(1.5 * theta)


def signorini_profile_xy(x, y):
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    return signorini_profile(r, theta)


def signorini_facet(r, theta, tol=1e-12):
    """Which facet of the thin-obstacle problem the point (r, theta) belongs to.

    Returns "interior" for theta in (0, pi), "free" on theta = 0 (profile
    positive, zero flux) and "contact" on theta = pi (profile zero,
    multiplier 3/2 sqrt(r)).
    """
    if abs(theta) <= tol:
        return "free"
    if abs(theta - np.pi) <= tol:
        return "contact"
    if 0.0 < theta < np.pi:
        return "interior"
    raise ValueError("theta outside [0, pi]")
