"""Minimal SVG scatter plots of 2-D node projections."""

from xml.sax.saxutils import escape

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
UNLABELED_COLOR = "#bbbbbb"


def scatter_svg(coords, labels, title="", size=640, margin=40, legend_width=140):
    """SVG text with one ``<circle>`` per row of ``coords``.

    Circle centers carry the raw coordinates (``repr`` precision); a group
    transform maps them into the canvas. Legend swatches are ``<rect>``
    elements so circles map one-to-one onto nodes.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = float(max((hi - lo).max(), 1e-12))
    inner = size - 2 * margin
    scale = inner / span
    cx = (lo[0] + hi[0]) / 2.0
    cy = (lo[1] + hi[1]) / 2.0
    tx = margin + inner / 2.0 - scale * cx
    ty = margin + inner / 2.0 + scale * cy
    radius = 3.0 / scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + legend_width}" height="{size}" '
        f'viewBox="0 0 {size + legend_width} {size}">',
        f'<rect x="0" y="0" width="{size + legend_width}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="{margin / 2:.1f}" font-family="sans-serif" '
                   f'font-size="14">{escape(title)}</text>')
    out.append(f'<g id="points" transform="matrix({scale!r} 0 0 {-scale!r} {tx!r} {ty!r})">')
    for (x, y), c in zip(coords, labels):
        color = PALETTE[c % len(PALETTE)] if c >= 0 else UNLABELED_COLOR
        out.append(f'<circle cx="{float(x)!r}" cy="{float(y)!r}" r="{radius!r}" '
                   f'fill="{color}" fill-opacity="0.8" data-label="{int(c)}"/>')
    out.append("</g>")
    out.append('<g id="legend" font-family="sans-serif" font-size="12">')
    classes = sorted(set(int(c) for c in labels))
    for i, c in enumerate(classes):
        y = margin + 20 * i
        color = PALETTE[c % len(PALETTE)] if c >= 0 else UNLABELED_COLOR
        name = f"class {c}" if c >= 0 else "unlabeled"
        out.append(f'<rect x="{size + 10}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{size + 28}" y="{y + 11}">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
