"""Self-contained deterministic SVG plots (no timestamps, fixed float format)."""
from __future__ import annotations

import numpy as np

W, H = 640, 480
MARGIN = 56
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
# coarse viridis anchors, linearly interpolated
_VIRIDIS = [
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
]


def _f(v) -> str:
    return format(float(v), ".6g")


def _color(t):
    t = min(max(float(t), 0.0), 1.0)
    for (a, ca), (b, cb) in zip(_VIRIDIS[:-1], _VIRIDIS[1:]):
        if t <= b:
            s = (t - a) / (b - a)
            rgb = tuple(int(round(x + s * (y - x))) for x, y in zip(ca, cb))
            return "#%02x%02x%02x" % rgb
    return "#fde725"


def _doc(body, title):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<text x="{W // 2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="monospace">{title}</text>\n'
    )
    return head + body + "</svg>\n"


def _axes(x0, x1, y0, y1, xticks, yticks, xlab, ylab):
    out = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{W - 2 * MARGIN}" '
        f'height="{H - 2 * MARGIN}" fill="none" stroke="black"/>'
    ]
    for tx, lab in xticks:
        px = MARGIN + (tx - x0) / (x1 - x0) * (W - 2 * MARGIN)
        out.append(
            f'<line x1="{_f(px)}" y1="{H - MARGIN}" x2="{_f(px)}" y2="{H - MARGIN + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_f(px)}" y="{H - MARGIN + 18}" text-anchor="middle" '
            f'font-size="10" font-family="monospace">{lab}</text>'
        )
    for ty, lab in yticks:
        py = H - MARGIN - (ty - y0) / (y1 - y0) * (H - 2 * MARGIN)
        out.append(
            f'<line x1="{MARGIN - 5}" y1="{_f(py)}" x2="{MARGIN}" y2="{_f(py)}" stroke="black"/>'
        )
        out.append(
            f'<text x="{MARGIN - 8}" y="{_f(py) }" text-anchor="end" '
            f'font-size="10" font-family="monospace">{lab}</text>'
        )
    out.append(
        f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-size="11" '
        f'font-family="monospace">{xlab}</text>'
    )
    out.append(
        f'<text x="14" y="{H // 2}" text-anchor="middle" font-size="11" '
        f'font-family="monospace" transform="rotate(-90 14 {H // 2})">{ylab}</text>'
    )
    return "\n".join(out) + "\n"


def _decade_ticks(lo, hi):
    ticks = []
    k = int(np.floor(np.log10(lo)))
    while 10.0 ** k <= hi * 1.0001:
        if 10.0 ** k >= lo * 0.9999:
            ticks.append((np.log(10.0 ** k), f"1e{k}"))
        k += 1
    if not ticks:
        ticks = [(np.log(lo), _f(lo)), (np.log(hi), _f(hi))]
    return ticks


def emit_loglog(series, title, xlab="r", ylab="value", annotate_slope=True) -> str:
    """Log-log plot of (name, x, y) series with a slope annotation."""
    series = [(n, np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for n, x, y in series]
    series = [(n, x[(x > 0) & (y > 0)], y[(x > 0) & (y > 0)]) for n, x, y in series]
    series = [(n, x, y) for n, x, y in series if len(x)]
    if not series:
        raise ValueError("emit_loglog: empty series")
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series])
    lx0, lx1 = np.log(xs.min()), np.log(xs.max())
    ly0, ly1 = np.log(ys.min()), np.log(ys.max())
    lx1 += 1e-9
    ly1 += 1e-9
    pad = 0.05
    lx0, lx1 = lx0 - pad * (lx1 - lx0), lx1 + pad * (lx1 - lx0)
    ly0, ly1 = ly0 - pad * (ly1 - ly0), ly1 + pad * (ly1 - ly0)
    body = _axes(
        lx0, lx1, ly0, ly1, _decade_ticks(np.exp(lx0), np.exp(lx1)),
        _decade_ticks(np.exp(ly0), np.exp(ly1)), xlab, ylab,
    )

    def px(v):
        return MARGIN + (np.log(v) - lx0) / (lx1 - lx0) * (W - 2 * MARGIN)

    def py(v):
        return H - MARGIN - (np.log(v) - ly0) / (ly1 - ly0) * (H - 2 * MARGIN)

    legend_y = MARGIN + 14
    for k, (name, x, y) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(x, y))
        body += f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>\n'
        for a, b in zip(x, y):
            body += f'<circle cx="{_f(px(a))}" cy="{_f(py(b))}" r="2.5" fill="{color}"/>\n'
        body += (
            f'<text x="{W - MARGIN - 8}" y="{legend_y}" text-anchor="end" font-size="11" '
            f'font-family="monospace" fill="{color}">{name}</text>\n'
        )
        legend_y += 14
    if annotate_slope:
        name, x, y = series[0]
        if len(x) >= 2:
            slope = np.polyfit(np.log(x), np.log(y), 1)[0]
            body += (
                f'<text x="{MARGIN + 8}" y="{MARGIN + 14}" font-size="11" '
                f'font-family="monospace">slope {format(slope, ".2f")}</text>\n'
            )
    return _doc(body, title)


def emit_heatmap(field, title, polylines=None) -> str:
    """Cell heatmap of a masked grid field with optional polyline overlays."""
    vals = field.values
    mask = field.mask
    if not mask.any():
        raise ValueError("emit_heatmap: empty field")
    vmin = float(np.nanmin(vals[mask]))
    vmax = float(np.nanmax(vals[mask]))
    span = vmax - vmin if vmax > vmin else 1.0
    spec = field.spec
    ny, nx = vals.shape
    plot_w, plot_h = W - 2 * MARGIN, H - 2 * MARGIN
    cw = plot_w / nx
    ch = plot_h / ny
    body = ""
    for j in range(ny):
        for i in range(nx):
            if not mask[j, i]:
                continue
            t = (vals[j, i] - vmin) / span
            x = MARGIN + i * cw
            y = H - MARGIN - (j + 1) * ch
            body += (
                f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cw + 0.5)}" '
                f'height="{_f(ch + 0.5)}" fill="{_color(t)}"/>\n'
            )

    def to_px(p):
        fx = (p[0] + spec.half_width) / spec.spacing
        fy = p[1] / spec.spacing
        return MARGIN + (fx + 0.5) * cw, H - MARGIN - (fy + 0.5) * ch

    if polylines:
        for line in polylines:
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(to_px, np.asarray(line)))
            body += f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="1.5"/>\n'
    body += (
        f'<text x="{MARGIN}" y="{H - MARGIN + 18}" font-size="10" font-family="monospace">'
        f"min {_f(vmin)} max {_f(vmax)}</text>\n"
    )
    return _doc(body, title)


def emit_polylines(named_lines, title, xlab="x", ylab="y") -> str:
    """Plain xy plot of polylines (e.g. analytic vs extracted free boundary)."""
    named_lines = [(n, np.asarray(p, dtype=float)) for n, p in named_lines if len(p)]
    if not named_lines:
        raise ValueError("emit_polylines: empty series")
    allp = np.vstack([p for _, p in named_lines])
    x0, x1 = allp[:, 0].min(), allp[:, 0].max()
    y0, y1 = allp[:, 1].min(), allp[:, 1].max()
    x1 += 1e-9
    y1 = max(y1, y0 + 1e-9)
    padx = 0.05 * (x1 - x0)
    pady = 0.05 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    xticks = [(v, _f(v)) for v in np.linspace(x0, x1, 5)]
    yticks = [(v, _f(v)) for v in np.linspace(y0, y1, 5)]
    body = _axes(x0, x1, y0, y1, xticks, yticks, xlab, ylab)

    def topx(p):
        return (
            MARGIN + (p[0] - x0) / (x1 - x0) * (W - 2 * MARGIN),
            H - MARGIN - (p[1] - y0) / (y1 - y0) * (H - 2 * MARGIN),
        )

    legend_y = MARGIN + 14
    for k, (name, line) in enumerate(named_lines):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(topx, line))
        body += f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>\n'
        body += (
            f'<text x="{W - MARGIN - 8}" y="{legend_y}" text-anchor="end" font-size="11" '
            f'font-family="monospace" fill="{color}">{name}</text>\n'
        )
        legend_y += 14
    return _doc(body, title)
