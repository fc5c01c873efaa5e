"""Uniform Cartesian grid fields and discrete elliptic operators.

All grids live on the upper half box [-R, R] x [0, R] with spacing h and
nodes at exact integer multiples of h (values[j, i] sits at x = (i - n) h,
y = j h with n = R / h). Three domain shapes are supported: the upper half
disk, the full box, and the region above a graph y = g(x) inside the disk.

Fields carry a boolean mask; unmasked nodes hold NaN and are excluded from
every reduction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class GeometryError(ValueError):
    """Mask or domain geometry unusable for the requested operation."""


class RadiusError(ValueError):
    """Radius outside the valid quadrature range [2h, R - 2h]."""


SHAPES = ("half_disk", "box", "graph_domain")


@dataclass(frozen=True)
class GridSpec:
    """Half-width R, spacing h and domain shape of a grid."""

    half_width: float
    spacing: float
    shape: str = "half_disk"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")
        ratio = self.half_width / self.spacing
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("half_width must be an integer multiple of spacing")
        if round(ratio) < 16:
            raise ValueError("need at least 16 cells per radius (R/h >= 16)")

    @property
    def n(self) -> int:
        """Cells per radius."""
        return int(round(self.half_width / self.spacing))

    @property
    def nx(self) -> int:
        return 2 * self.n + 1

    @property
    def ny(self) -> int:
        return self.n + 1

    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.n) * self.spacing

    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.spacing

    def mesh(self):
        return np.meshgrid(self.x(), self.y())


@dataclass
class ScalarField:
    """Grid function with a node mask; NaN sentinel outside the mask."""

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        shape = (self.spec.ny, self.spec.nx)
        if self.values.shape != shape or self.mask.shape != shape:
            raise ValueError(f"field arrays must have shape {shape}")
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("non-finite values at masked nodes")
        self.values[~self.mask] = np.nan

    @classmethod
    def from_function(cls, spec: GridSpec, fn, mask: Optional[np.ndarray] = None):
        X, Y = spec.mesh()
        if mask is None:
            mask = np.ones(X.shape, dtype=bool)
        vals = np.full(X.shape, np.nan)
        vals[mask] = np.asarray(fn(X[mask], Y[mask]), dtype=float)
        return cls(spec, vals, mask)

    def filled(self, fill=0.0) -> np.ndarray:
        """Values with the sentinel replaced, for vectorized arithmetic."""
        out = self.values.copy()
        out[~self.mask] = fill
        return out

    def max_abs(self) -> float:
        if not self.mask.any():
            return 0.0
        return float(np.max(np.abs(self.values[self.mask])))


@dataclass
class DomainGeometry:
    """Domain with a fixed-boundary graph g and outer Dirichlet data.

    For half_disk and box shapes g is identically zero and the fixed
    boundary Z is the floor y = 0. For graph_domain the domain is
    B_R intersected with {y > g(x)}.
    """

    spec: GridSpec
    g: Callable = None
    dirichlet: Callable = None
    sigma: float = 0.1

    def __post_init__(self):
        if self.g is None:
            self.g = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        if self.spec.shape == "graph_domain":
            self.check_graph_norm()

    def check_graph_norm(self):
        """Sampled check of g(0) = 0, g'(0) = 0 and the C^{1,1/2+sigma} bound."""
        x = self.spec.x()
        gx = np.asarray(self.g(x), dtype=float)
        h = self.spec.spacing
        i0 = self.spec.n
        if abs(gx[i0]) > 1e-12:
            raise GeometryError("graph must satisfy g(0) = 0")
        d0 = (gx[i0 + 1] - gx[i0 - 1]) / (2 * h)
        if abs(d0) > 1e-8:
            raise GeometryError("graph must satisfy g'(0) = 0")
        gp = np.gradient(gx, h)
        if np.max(np.abs(gx)) + np.max(np.abs(gp)) > 1.0 + 1e-9:
            raise GeometryError("graph exceeds the C^1 part of the norm bound")
        expo = 0.5 + self.sigma
        step = max(1, len(x) // 64)
        sub = np.arange(0, len(x), step)
        da = np.abs(gp[sub][:, None] - gp[sub][None, :])
        dx = np.abs(x[sub][:, None] - x[sub][None, :])
        np.fill_diagonal(dx, np.inf)
        if np.max(da / dx ** expo) > 1.0 + 1e-6:
            raise GeometryError("graph exceeds the Holder bound of the slope")


@dataclass
class DomainMasks:
    """Node classification: open interior, outer Dirichlet ring, fixed boundary."""

    inside: np.ndarray
    ring: np.ndarray
    zfix: np.ndarray

    @property
    def closure(self) -> np.ndarray:
        return self.inside | self.ring | self.zfix


def _adjacent(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def build_masks(geometry: DomainGeometry) -> DomainMasks:
    spec = geometry.spec
    X, Y = spec.mesh()
    R = spec.half_width
    RR = np.hypot(X, Y)
    tol = 1e-12
    if spec.shape == "box":
        inside = (np.abs(X) < R - tol) & (Y > tol) & (Y < R - tol)
        zfix = np.abs(Y) < tol
    elif spec.shape == "half_disk":
        inside = (RR < R - tol) & (Y > tol)
        zfix = (np.abs(Y) < tol) & (RR <= R + tol)
    else:
        gline = np.asarray(geometry.g(X[0]), dtype=float)[None, :]
        inside = (RR < R - tol) & (Y > gline + tol)
        zfix = (Y <= gline + tol) & (RR <= R + tol) & _adjacent((RR < R - tol) & (Y > gline + tol))
    ring = _adjacent(inside) & ~inside & ~zfix
    if spec.shape == "box":
        ring &= (np.abs(X) <= R + tol) & (Y <= R + tol)
    return DomainMasks(inside=inside, ring=ring, zfix=zfix)


@dataclass
class CoefficientField:
    """Symmetric coefficient matrix a^{ij} plus the free boundary weight Q."""

    a11: ScalarField
    a12: ScalarField
    a22: ScalarField
    Q: ScalarField
    ellipticity: float = 1.0

    def __post_init__(self):
        lam = self.ellipticity
        if lam < 1.0:
            raise ValueError("ellipticity constant must be >= 1")
        m = self.a11.mask
        a11 = self.a11.values[m]
        a22 = self.a22.values[m]
        a12 = self.a12.values[m]
        # eigenvalues of the symmetric 2x2 at every node
        half = 0.5 * (a11 + a22)
        rad = np.sqrt(0.25 * (a11 - a22) ** 2 + a12 ** 2)
        lo, hi = half - rad, half + rad
        if np.any(lo < 1.0 / lam - 1e-12) or np.any(hi > lam + 1e-12):
            raise ValueError("coefficients violate the ellipticity bounds")
        q = self.Q.values[self.Q.mask]
        if np.any(q <= 0.0):
            raise ValueError("Q must be positive")

    @classmethod
    def identity(cls, spec: GridSpec, q=1.0, mask: Optional[np.ndarray] = None):
        one = ScalarField.from_function(spec, lambda x, y: np.ones_like(x), mask)
        zero = ScalarField.from_function(spec, lambda x, y: np.zeros_like(x), mask)
        if callable(q):
            qf = ScalarField.from_function(spec, q, mask)
        else:
            qf = ScalarField.from_function(spec, lambda x, y, q=q: q * np.ones_like(x), mask)
        return cls(a11=one, a12=zero, a22=ScalarField(spec, one.values.copy(), one.mask.copy()), Q=qf)

    @property
    def is_identity(self) -> bool:
        m = self.a11.mask
        return (
            np.allclose(self.a11.values[m], 1.0)
            and np.allclose(self.a22.values[m], 1.0)
            and np.allclose(self.a12.values[m], 0.0)
        )


def interior_mask(mask: np.ndarray) -> np.ndarray:
    """Nodes whose full 5-point stencil lies in the mask."""
    out = mask.copy()
    out[1:, :] &= mask[:-1, :]
    out[:-1, :] &= mask[1:, :]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    out[0, :] = out[-1, :] = False
    out[:, 0] = out[:, -1] = False
    return out


def apply_operator(u: ScalarField, coeff: CoefficientField) -> ScalarField:
    """Divergence-form operator L u = d_i(a^{ij} d_j u) with face-averaged coefficients.

    Second-order consistent at nodes whose neighbors are all masked; the
    result is masked exactly there.
    """
    h = u.spec.spacing
    inner = interior_mask(u.mask)
    if not inner.any():
        raise GeometryError("mask too thin: no interior node has four neighbors")
    v = u.values
    a11 = coeff.a11.filled(1.0)
    a22 = coeff.a22.filled(1.0)
    a12 = coeff.a12.filled(0.0)

    out = np.full(v.shape, np.nan)
    j, i = np.where(inner)
    aE = 0.5 * (a11[j, i] + a11[j, i + 1])
    aW = 0.5 * (a11[j, i] + a11[j, i - 1])
    aN = 0.5 * (a22[j, i] + a22[j + 1, i])
    aS = 0.5 * (a22[j, i] + a22[j - 1, i])
    lap = (
        aE * (v[j, i + 1] - v[j, i])
        - aW * (v[j, i] - v[j, i - 1])
        + aN * (v[j + 1, i] - v[j, i])
        - aS * (v[j, i] - v[j - 1, i])
    ) / h ** 2
    if np.any(a12[u.mask] != 0.0):
        # cross fluxes need the full 3x3 neighborhood; restrict further
        inner2 = interior_mask(inner)
        j, i = np.where(inner2)
        vy = np.full(v.shape, np.nan)
        vy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
        vx = np.full(v.shape, np.nan)
        vx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
        fE = 0.5 * (a12[j, i] * vy[j, i] + a12[j, i + 1] * vy[j, i + 1])
        fW = 0.5 * (a12[j, i] * vy[j, i] + a12[j, i - 1] * vy[j, i - 1])
        fN = 0.5 * (a12[j, i] * vx[j, i] + a12[j + 1, i] * vx[j + 1, i])
        fS = 0.5 * (a12[j, i] * vx[j, i] + a12[j - 1, i] * vx[j - 1, i])
        out[inner] = lap
        out[j, i] += (fE - fW + fN - fS) / h
        res = np.full(v.shape, np.nan)
        res[inner2] = out[inner2]
        return ScalarField(u.spec, res, inner2)
    out[inner] = lap
    return ScalarField(u.spec, out, inner)


def gradient(u: ScalarField):
    """(du/dx, du/dy): centered inside, second-order one-sided at mask edges."""
    h = u.spec.spacing
    v = u.values
    m = u.mask
    ny, nx = v.shape
    gx = np.full(v.shape, np.nan)
    gy = np.full(v.shape, np.nan)

    def axis_grad(out, delta):
        dj, di = delta

        def shifted(arr, k):
            out_ = np.zeros_like(arr) if arr.dtype == bool else np.full(arr.shape, np.nan)
            jsrc = slice(max(k * dj, 0), ny + min(k * dj, 0) or ny)
            jdst = slice(max(-k * dj, 0), ny + min(-k * dj, 0) or ny)
            isrc = slice(max(k * di, 0), nx + min(k * di, 0) or nx)
            idst = slice(max(-k * di, 0), nx + min(-k * di, 0) or nx)
            out_[jdst, idst] = arr[jsrc, isrc]
            return out_

        m_p1, m_m1 = shifted(m, 1), shifted(m, -1)
        m_p2 = shifted(m, 2)
        m_m2 = shifted(m, -2)
        v_p1, v_m1 = shifted(v, 1), shifted(v, -1)
        v_p2, v_m2 = shifted(v, 2), shifted(v, -2)
        centered = m & m_p1 & m_m1
        out[centered] = (v_p1[centered] - v_m1[centered]) / (2 * h)
        fwd = m & m_p1 & m_p2 & ~centered
        out[fwd] = (-3 * v[fwd] + 4 * v_p1[fwd] - v_p2[fwd]) / (2 * h)
        bwd = m & m_m1 & m_m2 & ~centered & ~fwd
        out[bwd] = (3 * v[bwd] - 4 * v_m1[bwd] + v_m2[bwd]) / (2 * h)
        fwd1 = m & m_p1 & ~centered & ~fwd & ~bwd
        out[fwd1] = (v_p1[fwd1] - v[fwd1]) / h
        bwd1 = m & m_m1 & ~centered & ~fwd & ~bwd & ~fwd1
        out[bwd1] = (v[bwd1] - v_m1[bwd1]) / h
        return m & (centered | fwd | bwd | fwd1 | bwd1)

    mx = axis_grad(gx, (0, 1))
    my = axis_grad(gy, (1, 0))
    mk = mx & my
    gxf = ScalarField(u.spec, np.where(mk, gx, np.nan), mk)
    gyf = ScalarField(u.spec, np.where(mk, gy, np.nan), mk)
    return gxf, gyf


def dump_field(f: ScalarField, name: str) -> str:
    """Text dump: header lines then row-major values, nan for unmasked nodes."""
    lines = [
        "# fb-lab field",
        f"shape={f.spec.shape}",
        f"R={f.spec.half_width!r}",
        f"h={f.spec.spacing!r}",
        f"name={name}",
        f"rows={f.spec.ny}",
        f"cols={f.spec.nx}",
    ]
    for j in range(f.spec.ny):
        row = " ".join("nan" if not f.mask[j, i] else repr(float(f.values[j, i])) for i in range(f.spec.nx))
        lines.append(row)
    return "\n".join(lines) + "\n"


def load_field(text: str):
    """Inverse of dump_field; returns (field, name)."""
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("# fb-lab field"):
        raise ValueError("not a fb-lab field dump")
    hdr = {}
    k = 1
    while "=" in lines[k]:
        key, _, val = lines[k].partition("=")
        hdr[key.strip()] = val.strip()
        k += 1
        if k >= len(lines):
            break
    spec = GridSpec(half_width=float(hdr["R"]), spacing=float(hdr["h"]), shape=hdr["shape"])
    rows = int(hdr["rows"])
    cols = int(hdr["cols"])
    vals = np.full((rows, cols), np.nan)
    for j in range(rows):
        vals[j] = np.array(lines[k + j].split(), dtype=float)
    mask = np.isfinite(vals)
    return ScalarField(spec, vals, mask), hdr.get("name", "field")
