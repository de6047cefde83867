"""Minimal SVG views of CSV outputs: scatter, line and heatmap."""
import numpy as np

W, H, PAD = 480, 360, 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">{_esc(title)}</text>',
    ]


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _scaler(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _bounds(arrays):
    cat = np.concatenate([np.asarray(a, dtype=float).reshape(-1) for a in arrays])
    lo, hi = float(cat.min()), float(cat.max())
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    return lo - pad, hi + pad


def _axes(xr, yr):
    x0, x1 = PAD, W - PAD
    y0, y1 = H - PAD, PAD
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 15}" font-size="10">{xr[0]:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 15}" font-size="10" text-anchor="end">{xr[1]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" font-size="10" text-anchor="end">{yr[0]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 8}" font-size="10" text-anchor="end">{yr[1]:.3g}</text>',
    ]
    return out, _scaler(xr[0], xr[1], x0, x1), _scaler(yr[0], yr[1], y0, y1)


def _legend(labels):
    out = []
    for i, label in enumerate(labels):
        y = PAD + 14 * i
        out.append(f'<rect x="{W - PAD - 110}" y="{y - 8}" width="8" height="8" fill="{PALETTE[i % len(PALETTE)]}"/>')
        out.append(f'<text x="{W - PAD - 98}" y="{y}" font-size="10">{_esc(label)}</text>')
    return out


def scatter(groups, title=""):
    """``groups`` maps a label to an (n, 2) array."""
    arrays = [np.asarray(p, dtype=float).reshape(-1, 2) for p in groups.values()]
    xr = _bounds([a[:, 0] for a in arrays])
    yr = _bounds([a[:, 1] for a in arrays])
    parts = _header(title)
    ax, sx, sy = _axes(xr, yr)
    parts += ax
    for i, pts in enumerate(arrays):
        c = PALETTE[i % len(PALETTE)]
        parts += [f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{c}" fill-opacity="0.7"/>' for x, y in pts]
    parts += _legend(groups)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def lines(series, title=""):
    """``series`` maps a label to ``(xs, ys)``."""
    xr = _bounds([np.asarray(xs) for xs, _ in series.values()])
    yr = _bounds([np.asarray(ys) for _, ys in series.values()])
    parts = _header(title)
    ax, sx, sy = _axes(xr, yr)
    parts += ax
    for i, (xs, ys) in enumerate(series.values()):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5"/>')
    parts += _legend(series)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap(values, row_labels, col_labels, title=""):
    """Grey-scale cells with the value printed inside; rows top to bottom."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    shade = _scaler(lo, hi, 0.0, 1.0)
    n_r, n_c = v.shape
    cw = (W - 2 * PAD) / n_c
    ch = (H - 2 * PAD) / n_r
    parts = _header(title)
    for i in range(n_r):
        parts.append(f'<text x="{PAD - 4}" y="{PAD + (i + 0.5) * ch:.1f}" font-size="10" text-anchor="end">{_esc(row_labels[i])}</text>')
        for j in range(n_c):
            g = int(255 - 200 * shade(v[i, j]))
            x, y = PAD + j * cw, PAD + i * ch
            ink = "white" if g < 128 else "black"
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw:.1f}" height="{ch:.1f}" fill="rgb({g},{g},{g})"/>')
            parts.append(f'<text x="{x + cw / 2:.1f}" y="{y + ch / 2 + 4:.1f}" font-size="10" text-anchor="middle" fill="{ink}">{v[i, j]:.2f}</text>')
    for j in range(n_c):
        parts.append(f'<text x="{PAD + (j + 0.5) * cw:.1f}" y="{H - PAD + 14}" font-size="10" text-anchor="middle">{_esc(col_labels[j])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
