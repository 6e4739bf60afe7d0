"""Forest plots of effect estimates as standalone SVG.

Encoding: a circle marks the posterior mean, a thick bar the 80% credible
interval, a thin line the 95% interval, and ``***`` flags causes whose 95%
interval excludes zero.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["forest_plot_svg", "write_forest_plot"]

ROW_H = 22
LABEL_W = 160
PLOT_W = 420
MARK_W = 50
PAD = 20


def _ticks(lo, hi, n=5):
    span = hi - lo
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [round(float(t), 10) for t in np.arange(start, hi + step * 1e-9, step)]


def forest_plot_svg(report, title: str = "") -> str:
    """Render an ``EffectReport`` as SVG text."""
    n = len(report)
    if n == 0:
        raise ValueError("effect report is empty; nothing to plot")
    ci80, ci95 = report.ci80, report.ci95
    lo = min(float(ci95[:, 0].min()), 0.0)
    hi = max(float(ci95[:, 1].max()), 0.0)
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise ValueError("credible intervals must be finite to plot")
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    margin = 0.05 * (hi - lo)
    lo, hi = lo - margin, hi + margin

    top = PAD + (ROW_H if title else 0)
    width = LABEL_W + PLOT_W + MARK_W + 2 * PAD
    axis_y = top + n * ROW_H + 4
    height = axis_y + 40

    def x(v):
        return LABEL_W + PAD + (float(v) - lo) / (hi - lo) * PLOT_W

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="{PAD + 4}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.append(
        f'<line x1="{x(0):.2f}" y1="{top - 4}" x2="{x(0):.2f}" y2="{axis_y}" stroke="#888" stroke-dasharray="4,3"/>'
    )
    causal = report.causal
    for j in range(n):
        cy = top + j * ROW_H + ROW_H / 2
        parts.append(
            f'<text x="{LABEL_W + PAD - 8}" y="{cy + 4:.1f}" text-anchor="end">{escape(str(report.labels[j]))}</text>'
        )
        parts.append(
            f'<line x1="{x(ci95[j, 0]):.2f}" y1="{cy:.1f}" x2="{x(ci95[j, 1]):.2f}" y2="{cy:.1f}" '
            'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{x(ci80[j, 0]):.2f}" y1="{cy:.1f}" x2="{x(ci80[j, 1]):.2f}" y2="{cy:.1f}" '
            'stroke="black" stroke-width="4"/>'
        )
        parts.append(f'<circle cx="{x(report.mean[j]):.2f}" cy="{cy:.1f}" r="4" fill="white" stroke="black"/>')
        if causal[j]:
            parts.append(f'<text x="{LABEL_W + PAD + PLOT_W + 8}" y="{cy + 4:.1f}">***</text>')

    parts.append(
        f'<line x1="{x(lo):.2f}" y1="{axis_y}" x2="{x(hi):.2f}" y2="{axis_y}" stroke="black"/>'
    )
    for t in _ticks(lo, hi):
        parts.append(f'<line x1="{x(t):.2f}" y1="{axis_y}" x2="{x(t):.2f}" y2="{axis_y + 4}" stroke="black"/>')
        parts.append(f'<text x="{x(t):.2f}" y="{axis_y + 16}" text-anchor="middle">{t:g}</text>')
    parts.append(
        f'<text x="{x((lo + hi) / 2):.2f}" y="{axis_y + 32}" text-anchor="middle">treatment effect</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_forest_plot(report, path, title: str = "") -> Path:
    svg = forest_plot_svg(report, title)
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path
