"""Dependency-free SVG charts of sweep curves.

Each chart is 800x500 with the swept parameter on x, F1 (solid) and
F1-overall (dashed) against the left axis, the defer rate against the
right axis, and an optional dotted line at the no-defer baseline F1.
"""
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 50, 60
F1_COLOR = "#c0392b"
DEFER_COLOR = "#2e5eaa"


def _nice_ticks(lo, hi, count=6):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _polylines(points):
    """Split a point list at ``None`` gaps into runs of (x, y)."""
    runs, current = [], []
    for p in points:
        if p is None:
            if len(current) > 1:
                runs.append(current)
            current = []
        else:
            current.append(p)
    if len(current) > 1:
        runs.append(current)
    return runs


def render_curve_svg(rows, title="", x_label="param", baseline_f1=None):
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    xs = [r.param for r in rows]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return TOP + (1.0 - y) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>',
    ]
    for t in _nice_ticks(0.0, 1.0):
        y = sy(t)
        out.append(f'<line x1="{LEFT}" y1="{y:.1f}" x2="{LEFT + plot_w}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.1f}" text-anchor="end" fill="{F1_COLOR}">{t:.1f}</text>')
        out.append(f'<text x="{LEFT + plot_w + 8}" y="{y + 4:.1f}" fill="{DEFER_COLOR}">{t:.1f}</text>')
    for t in _nice_ticks(x_lo, x_hi):
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{TOP + plot_h}" x2="{x:.1f}" y2="{TOP + plot_h + 5}" stroke="#333"/>')
        out.append(f'<text x="{x:.1f}" y="{TOP + plot_h + 20}" text-anchor="middle">{t:.3g}</text>')
    out.append(f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text transform="translate(20,{TOP + plot_h / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle" fill="{F1_COLOR}">F1</text>')
    out.append(f'<text transform="translate({WIDTH - 18},{TOP + plot_h / 2:.1f}) rotate(90)" '
               f'text-anchor="middle" fill="{DEFER_COLOR}">defer rate</text>')

    if baseline_f1 is not None:
        y = sy(baseline_f1)
        out.append(f'<line x1="{LEFT}" y1="{y:.1f}" x2="{LEFT + plot_w}" y2="{y:.1f}" '
                   f'stroke="{F1_COLOR}" stroke-dasharray="2,4" stroke-width="1.5"/>')

    series = (
        ("f1", F1_COLOR, None),
        ("f1_overall", F1_COLOR, "8,4"),
        ("defer_rate", DEFER_COLOR, None),
    )
    for name, color, dash in series:
        pts = [None if getattr(r, name) is None else (sx(r.param), sy(getattr(r, name))) for r in rows]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        runs = _polylines(pts)
        for run in runs:
            coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in run)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>')
        for p in (q for q in pts if q is not None):
            out.append(f'<circle cx="{p[0]:.1f}" cy="{p[1]:.1f}" r="2.5" fill="{color}"/>')

    legend = [("F1 (not deferred)", F1_COLOR, None), ("F1 overall", F1_COLOR, "8,4"),
              ("defer rate", DEFER_COLOR, None)]
    if baseline_f1 is not None:
        legend.append((f"no-defer F1 = {baseline_f1:.3f}", F1_COLOR, "2,4"))
    for i, (label, color, dash) in enumerate(legend):
        y = TOP + 15 + 16 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{LEFT + 10}" y1="{y}" x2="{LEFT + 40}" y2="{y}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{LEFT + 46}" y="{y + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
