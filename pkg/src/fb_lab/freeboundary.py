"""Free boundary polylines: extraction, chaining, contact classification.

The zero level set of a nonnegative solution is traced marching-squares
style over grid cells; crossing positions on edges are sharpened by
one-sided linear extrapolation from the positive side, which removes the
snap-to-node bias when the field is exactly zero beyond the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .grid import GeometryError, ScalarField


class DegenerateSolutionError(RuntimeError):
    """Positivity set empty; no free boundary to extract."""


@dataclass
class FreeBoundarySet:
    """Chained free boundary polylines with contact markup.

    polylines: list of (n, 2) vertex arrays ordered by arc continuation.
    contact:   matching list of boolean vertex masks (vertex lies on Z).
    """

    polylines: List[np.ndarray]
    contact: List[np.ndarray]
    spacing: float

    def vertices(self) -> np.ndarray:
        if not self.polylines:
            return np.zeros((0, 2))
        return np.vstack(self.polylines)

    def contact_vertices(self) -> np.ndarray:
        out = [p[c] for p, c in zip(self.polylines, self.contact) if c.any()]
        return np.vstack(out) if out else np.zeros((0, 2))

    def detached_vertices(self) -> np.ndarray:
        out = [p[~c] for p, c in zip(self.polylines, self.contact) if (~c).any()]
        return np.vstack(out) if out else np.zeros((0, 2))

    def detachment_points(self) -> np.ndarray:
        """Endpoints of maximal contact runs interior to a polyline."""
        pts = []
        for p, c in zip(self.polylines, self.contact):
            n = len(p)
            for k in range(n):
                if not c[k]:
                    continue
                left_open = k > 0 and not c[k - 1]
                right_open = k < n - 1 and not c[k + 1]
                if left_open or right_open:
                    pts.append(p[k])
        return np.asarray(pts) if pts else np.zeros((0, 2))

    def arclengths(self):
        out = []
        for p in self.polylines:
            d = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
            out.append(d)
        return out


def _edge_crossing(uA, uB, level, uA2=None):
    """Fraction from A of the zero of (u - level) on an edge; one-sided refined.

    uA > level >= uB; uA2 is the value one node beyond A away from B, used to
    estimate the one-sided slope.
    """
    t_lin = (uA - level) / (uA - uB) if uA != uB else 0.5
    if uA2 is not None and np.isfinite(uA2):
        slope = uA2 - uA  # value change per node step away from B
        if slope > 1e-300:
            t_ref = (uA - level) / slope
            if 0.0 <= t_ref <= 1.0:
                return t_ref
    return t_lin


def extract_zero_polylines(
    u: ScalarField,
    level: Optional[float] = None,
    snap_tol: Optional[float] = None,
) -> FreeBoundarySet:
    """Trace the boundary of the positivity set of u as ordered polylines.

    A node counts as positive iff u > level (default 1e-12 * max|u|). Cell
    edges with a sign change contribute a crossing; crossings within a cell
    are joined into segments, segments chained into polylines. Vertices
    within snap_tol (default h/2) of the floor y = 0 are snapped onto it and
    flagged as contact.
    """
    h = u.spec.spacing
    if level is None:
        level = 1e-12 * u.max_abs()
    if snap_tol is None:
        snap_tol = 0.5 * h
    v = u.values
    m = u.mask
    pos = m & (u.filled(-np.inf) > level)
    if not pos.any():
        raise DegenerateSolutionError("positivity set is empty")

    x0 = -u.spec.half_width
    ny, nx = v.shape
    segments = []

    def crossing(j, i, dj, di):
        """Crossing on edge (j,i)->(j+dj,i+di); returns point or None."""
        ja, ia, jb, ib = j, i, j + dj, i + di
        pa, pb = pos[ja, ia], pos[jb, ib]
        if pa == pb:
            return None
        if not pa:  # make A the positive endpoint
            ja, ia, jb, ib = jb, ib, ja, ia
            dj, di = -dj, -di
        j2, i2 = ja - dj, ia - di
        uA2 = v[j2, i2] if (0 <= j2 < ny and 0 <= i2 < nx and m[j2, i2] and pos[j2, i2]) else None
        uB = v[jb, ib] if m[jb, ib] else 0.0
        t = _edge_crossing(v[ja, ia], uB, level, uA2)
        return (x0 + (ia + t * (ib - ia)) * h, (ja + t * (jb - ja)) * h)

    for j in range(ny - 1):
        for i in range(nx - 1):
            corners = (m[j, i], m[j, i + 1], m[j + 1, i + 1], m[j + 1, i])
            if not all(corners):
                continue
            flags = (pos[j, i], pos[j, i + 1], pos[j + 1, i + 1], pos[j + 1, i])
            if all(flags) or not any(flags):
                continue
            pts = []
            for (ja, ia, dj, di) in (
                (j, i, 0, 1),
                (j, i + 1, 1, 0),
                (j + 1, i + 1, 0, -1),
                (j + 1, i, -1, 0),
            ):
                p = crossing(ja, ia, dj, di)
                if p is not None:
                    pts.append(p)
            if len(pts) >= 2:
                # degenerate saddle cells contribute two segments; pair in order
                for a in range(0, len(pts) - 1, 2):
                    segments.append((pts[a], pts[a + 1]))

    polylines = chain_segments(segments, tol=1e-9 * max(1.0, u.spec.half_width))
    out_lines, out_contact = [], []
    for line in polylines:
        line = np.asarray(line)
        snap = line[:, 1] <= snap_tol
        line[snap, 1] = 0.0
        out_lines.append(line)
        out_contact.append(snap)
    return FreeBoundarySet(out_lines, out_contact, h)


def chain_segments(segments, tol=1e-9):
    """Join endpoint-matching segments into ordered polylines."""
    if not segments:
        return []

    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    adj = {}
    for sidx, (a, b) in enumerate(segments):
        adj.setdefault(key(a), []).append((sidx, 0))
        adj.setdefault(key(b), []).append((sidx, 1))
    used = [False] * len(segments)
    lines = []
    order = sorted(range(len(segments)), key=lambda s: (segments[s][0], segments[s][1]))
    for start in order:
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        line = [a, b]
        # extend forward from b, then backward from a
        for endsel in (1, 0):
            while True:
                tip = line[-1] if endsel == 1 else line[0]
                candidates = [
                    (sidx, e)
                    for sidx, e in adj.get(key(tip), [])
                    if not used[sidx]
                ]
                if not candidates:
                    break
                sidx, e = candidates[0]
                used[sidx] = True
                nxt = segments[sidx][1 - e]
                if endsel == 1:
                    line.append(nxt)
                else:
                    line.insert(0, nxt)
        lines.append(line)
    return lines


def hausdorff_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point sets/polylines."""
    from scipy.spatial import cKDTree

    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if len(P) == 0 or len(Q) == 0:
        raise GeometryError("empty point set in hausdorff_distance")
    d1 = cKDTree(Q).query(P)[0].max()
    d2 = cKDTree(P).query(Q)[0].max()
    return float(max(d1, d2))


def densify_polyline(p: np.ndarray, step: float) -> np.ndarray:
    """Resample a polyline so consecutive points are at most `step` apart."""
    p = np.asarray(p, dtype=float)
    if len(p) < 2:
        return p
    out = [p[0]]
    for a, b in zip(p[:-1], p[1:]):
        d = np.linalg.norm(b - a)
        n = max(1, int(np.ceil(d / step)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return np.asarray(out)


def polyline_csv(fb: FreeBoundarySet) -> str:
    """CSV dump: x, y, arc-length, contact flag, one block per polyline."""
    rows = ["x,y,s,contact"]
    for line, contact, s in zip(fb.polylines, fb.contact, fb.arclengths()):
        for (px, py), c, sv in zip(line, contact, s):
            rows.append(f"{px!r},{py!r},{sv!r},{int(c)}")
        rows.append("")
    return "\n".join(rows).rstrip("\n") + "\n"


def parse_polyline_csv(text: str) -> FreeBoundarySet:
    lines, contact = [], []
    cur, curc = [], []
    for row in text.strip().splitlines()[1:] + [""]:
        if not row.strip():
            if cur:
                lines.append(np.asarray(cur))
                contact.append(np.asarray(curc, dtype=bool))
                cur, curc = [], []
            continue
        xs, ys, _, cs = row.split(",")
        cur.append((float(xs), float(ys)))
        curc.append(bool(int(cs)))
    return FreeBoundarySet(lines, contact, spacing=0.0)
