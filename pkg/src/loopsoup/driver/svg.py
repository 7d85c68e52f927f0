"""Minimal hand-written SVG log-log plots."""
import math


def loglog_plot(points, fit=None, reference=None, title="", xlabel="log(l/d)", ylabel="log p"):
    """points: (x, y, ylo, yhi) in log space; fit/reference: (slope, intercept)."""
    W, H, m = 480, 360, 50
    xs = [p[0] for p in points]
    ys = [v for p in points for v in p[1:] if math.isfinite(v)]
    if not xs or not ys:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}"></svg>\n'
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    padx, pady = 0.08 * (x1 - x0), 0.08 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="black"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle">{title}</text>',
           f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{H / 2:.1f}" transform="rotate(-90 14 {H / 2:.1f})" text-anchor="middle">{ylabel}</text>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.1f}" y="{H - m + 14}" text-anchor="middle">{xv:.2f}</text>')
        out.append(f'<text x="{m - 4}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.2f}</text>')
    for line, colour, dash in ((fit, "#c0392b", ""), (reference, "#2c3e50", ' stroke-dasharray="5,4"')):
        if line is None:
            continue
        s, b = line
        out.append(f'<line x1="{px(x0):.1f}" y1="{py(s * x0 + b):.1f}" x2="{px(x1):.1f}" y2="{py(s * x1 + b):.1f}" '
                   f'stroke="{colour}"{dash} clip-path="inset(0)"/>')
    for x, y, lo, hi in points:
        if math.isfinite(lo) and math.isfinite(hi):
            out.append(f'<line x1="{px(x):.1f}" y1="{py(lo):.1f}" x2="{px(x):.1f}" y2="{py(hi):.1f}" stroke="#555"/>')
        out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3.5" fill="#2980b9"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
