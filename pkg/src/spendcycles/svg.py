"""Hand-rolled deterministic SVG charts: series lines and 2-D scatters.

No plotting dependency: fixed palette, fixed coordinate formatting, so the
same input always yields the same bytes.
"""

from xml.sax.saxutils import escape

import numpy as np

from .errors import InputError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")

_MARGIN = 46.0


def _fmt(v):
    # fixed decimals keep output byte-stable
    return f"{v:.3f}"


def _scale(lo, hi):
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def _color(i):
    return PALETTE[i % len(PALETTE)]


def _header(width, height, title):
    doc = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
           f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">']
    doc.append(f'<rect x="0" y="0" width="{width:g}" height="{height:g}" fill="white"/>')
    if title:
        doc.append(f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    return doc


def _axes(doc, width, height, lo, hi):
    x0, y0, x1, y1 = _MARGIN, height - _MARGIN, width - _MARGIN, _MARGIN
    doc.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" '
               'stroke="#333333" stroke-width="1"/>')
    doc.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
               'stroke="#333333" stroke-width="1"/>')
    doc.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(y0)}" text-anchor="end" '
               f'font-family="sans-serif" font-size="10">{_fmt(lo)}</text>')
    doc.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(y1 + 4)}" text-anchor="end" '
               f'font-family="sans-serif" font-size="10">{_fmt(hi)}</text>')


def _legend(doc, names, colors, width):
    x = width - _MARGIN - 150.0
    y = _MARGIN + 4.0
    for name, color in zip(names, colors):
        doc.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y - 4)}" x2="{_fmt(x + 18)}" '
                   f'y2="{_fmt(y - 4)}" stroke="{color}" stroke-width="2"/>')
        doc.append(f'<text x="{_fmt(x + 24)}" y="{_fmt(y)}" font-family="sans-serif" '
                   f'font-size="11">{escape(str(name))}</text>')
        y += 16.0


def render_series_svg(series, labels=None, annotations=None, width=900.0,
                      height=420.0, title=""):
    """One polyline per series plus a legend.

    annotations: optional list of (series index, start, length) windows,
    drawn as translucent boxes in the owning series' color.
    """
    rows = [np.asarray(s, dtype=np.float64) for s in series]
    if not rows or any(r.ndim != 1 or r.size == 0 for r in rows):
        raise InputError("need at least one nonempty series")
    if labels is None:
        labels = [f"series_{i}" for i in range(len(rows))]
    if len(labels) != len(rows):
        raise InputError("one label per series required")
    lo, hi = _scale(min(float(r.min()) for r in rows),
                    max(float(r.max()) for r in rows))
    t_max = max(r.size for r in rows)
    span_x = max(t_max - 1, 1)

    def px(t):
        return _MARGIN + (width - 2 * _MARGIN) * (t / span_x)

    def py(v):
        return height - _MARGIN - (height - 2 * _MARGIN) * ((v - lo) / (hi - lo))

    doc = _header(width, height, title)
    _axes(doc, width, height, lo, hi)
    for ann in annotations or []:
        try:
            s_idx, start, length = ann
        except (TypeError, ValueError):
            raise InputError("annotations must be (series, start, length) triples") from None
        if not 0 <= s_idx < len(rows):
            raise InputError(f"annotation references series {s_idx}")
        x_left, x_right = px(start), px(start + length - 1)
        doc.append(f'<rect x="{_fmt(x_left)}" y="{_fmt(_MARGIN)}" '
                   f'width="{_fmt(x_right - x_left)}" '
                   f'height="{_fmt(height - 2 * _MARGIN)}" '
                   f'fill="{_color(s_idx)}" fill-opacity="0.15"/>')
    for i, r in enumerate(rows):
        pts = " ".join(f"{_fmt(px(t))},{_fmt(py(float(v)))}" for t, v in enumerate(r))
        doc.append(f'<polyline fill="none" stroke="{_color(i)}" stroke-width="1.5" '
                   f'points="{pts}"/>')
    _legend(doc, labels, [_color(i) for i in range(len(rows))], width)
    doc.append("</svg>")
    return "\n".join(doc) + "\n"


def render_scatter_svg(points, labels=None, clusters=None, width=640.0,
                       height=640.0, title=""):
    """2-D scatter, one circle per point, colored by cluster id."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise InputError("points must be a nonempty (n, 2) array")
    n = pts.shape[0]
    if clusters is None:
        clusters = np.zeros(n, dtype=int)
    clusters = np.asarray(clusters, dtype=int)
    if clusters.shape != (n,):
        raise InputError("one cluster id per point required")
    x_lo, x_hi = _scale(float(pts[:, 0].min()), float(pts[:, 0].max()))
    y_lo, y_hi = _scale(float(pts[:, 1].min()), float(pts[:, 1].max()))

    def px(v):
        return _MARGIN + (width - 2 * _MARGIN) * ((v - x_lo) / (x_hi - x_lo))

    def py(v):
        return height - _MARGIN - (height - 2 * _MARGIN) * ((v - y_lo) / (y_hi - y_lo))

    doc = _header(width, height, title)
    _axes(doc, width, height, y_lo, y_hi)
    for i in range(n):
        doc.append(f'<circle cx="{_fmt(px(pts[i, 0]))}" cy="{_fmt(py(pts[i, 1]))}" '
                   f'r="4" fill="{_color(int(clusters[i]))}" fill-opacity="0.8">'
                   f'<title>{escape(str(labels[i]) if labels else str(i))}</title>'
                   '</circle>')
    ids = sorted(set(int(c) for c in clusters))
    _legend(doc, [f"cluster {c}" for c in ids], [_color(c) for c in ids], width)
    doc.append("</svg>")
    return "\n".join(doc) + "\n"


def write_svg(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)
