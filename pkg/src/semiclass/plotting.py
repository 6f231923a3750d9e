"""Self-contained SVG and gnuplot output for scaling reports."""

from __future__ import annotations

import math

from .analysis import ScalingReport

__all__ = ["scaling_svg", "gnuplot_script"]

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
W, H = 640, 480
ML, MR, MT, MB = 70, 150, 30, 50


def _f(v: float) -> str:
    return f"{v:.2f}"


def scaling_svg(report: ScalingReport) -> str:
    """Log-log plot of norm against h.

    Markers are measured norms, the solid line has the theoretical slope
    -delta(p) and the dashed line the comparison exponent, both anchored at
    the smallest fitted h.
    """
    keys = list(report.fitted)
    pts = {k: sorted((r["h"], r["norm"]) for r in report.rows if r["p"] == k) for k in keys}
    lx = [math.log10(h) for k in keys for h, _ in pts[k]]
    ly = [math.log10(v) for k in keys for _, v in pts[k] if v > 0]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    padx = 0.05 * (x1 - x0 or 1.0)
    pady = 0.1 * (y1 - y0 or 1.0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def X(lh):
        return ML + (lh - x0) / (x1 - x0) * (W - ML - MR)

    def Y(lv):
        return H - MB - (lv - y0) / (y1 - y0) * (H - MT - MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
        f'<text x="{ML + (W - ML - MR) / 2:.2f}" y="{H - 10}" text-anchor="middle" font-size="13">h (log scale)</text>',
        f'<text x="15" y="{MT + (H - MT - MB) / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 15 {MT + (H - MT - MB) / 2:.2f})">||u||_p (log scale)</text>',
    ]
    for e in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<line x1="{_f(X(e))}" y1="{H - MB}" x2="{_f(X(e))}" y2="{H - MB + 5}" stroke="black"/>')
        out.append(f'<text x="{_f(X(e))}" y="{H - MB + 18}" text-anchor="middle" font-size="11">1e{e}</text>')
    for e in range(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<line x1="{ML - 5}" y1="{_f(Y(e))}" x2="{ML}" y2="{_f(Y(e))}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{_f(Y(e) + 4)}" text-anchor="end" font-size="11">1e{e}</text>')
    anchor_h = min(report.fit_h) if report.fit_h else min(h for h, _ in pts[keys[0]])
    for i, k in enumerate(keys):
        c = COLORS[i % len(COLORS)]
        for h, v in pts[k]:
            fill = c if h in report.fit_h else "none"
            out.append(f'<circle cx="{_f(X(math.log10(h)))}" cy="{_f(Y(math.log10(v)))}" r="3.5" '
                       f'fill="{fill}" stroke="{c}"/>')
        av = dict(pts[k])[anchor_h]
        for slope, dash in ((report.theoretical[k], ""), (report.ktz_reference.get(k), ' stroke-dasharray="6,4"')):
            if slope is None:
                continue
            la = math.log10(anchor_h)
            ya = math.log10(av)
            out.append(
                f'<line x1="{_f(X(x0))}" y1="{_f(Y(ya - slope * (x0 - la)))}" '
                f'x2="{_f(X(x1))}" y2="{_f(Y(ya - slope * (x1 - la)))}" stroke="{c}"{dash}/>'
            )
        d, s = report.fitted[k]
        ly_ = MT + 20 + 40 * i
        out.append(f'<circle cx="{W - MR + 15}" cy="{ly_}" r="3.5" fill="{c}" stroke="{c}"/>')
        out.append(f'<text x="{W - MR + 25}" y="{ly_ + 4}" font-size="12">p = {k}</text>')
        out.append(f'<text x="{W - MR + 25}" y="{ly_ + 20}" font-size="11">fit {d:.3f}, theory {report.theoretical[k]:.3f}</text>')
    out.append(f'<text x="{ML}" y="{MT - 10}" font-size="12">{_escape(report.operator_desc)} (n = {report.n});'
               ' solid: theoretical slope, dashed: comparison exponent</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def gnuplot_script(report: ScalingReport, csv_name: str = "scaling.csv") -> str:
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'h'",
        "set ylabel '||u||_p'",
        "set key outside right",
        "set terminal svg size 640,480",
        "set output 'scaling_gnuplot.svg'",
    ]
    plots = []
    for k in report.fitted:
        plots.append(f"'{csv_name}' using (strcol(2) eq '{k}' ? $1 : 1/0):3 with points title 'p = {k}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
