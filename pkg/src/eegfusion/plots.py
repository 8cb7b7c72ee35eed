"""Self-contained SVG emitters for the report plots.

Plain string assembly, no plotting dependency; output is deterministic
for identical inputs so report files stay byte-reproducible.
"""

from __future__ import annotations

W, H = 640, 400
MARGIN = 60
PALETTE = ("#4878a8", "#e1812c", "#3a923a", "#c03d3e", "#9372b2")


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]


def bar_chart_svg(labels, values, title: str = "Accuracy", y_max: float = 100.0) -> str:
    """Vertical bars, one per label, y axis 0..y_max."""
    parts = _header(title)
    plot_w = W - 2 * MARGIN
    plot_h = H - 2 * MARGIN
    parts.append(
        f'<line x1="{MARGIN}" y1="{H - MARGIN}" x2="{W - MARGIN}" y2="{H - MARGIN}" '
        f'stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{H - MARGIN}" stroke="black"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = H - MARGIN - frac * plot_h
        parts.append(
            f'<text x="{MARGIN - 8}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{frac * y_max:.0f}</text>'
        )
        parts.append(
            f'<line x1="{MARGIN}" y1="{y:.1f}" x2="{W - MARGIN}" y2="{y:.1f}" '
            f'stroke="#dddddd"/>'
        )
    n = max(len(labels), 1)
    slot = plot_w / n
    bar_w = slot * 0.6
    for i, (label, value) in enumerate(zip(labels, values)):
        x = MARGIN + i * slot + (slot - bar_w) / 2
        h = max(min(value / y_max, 1.0), 0.0) * plot_h
        y = H - MARGIN - h
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{y - 6:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{value:.1f}</text>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{H - MARGIN + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def roc_curve_svg(points, auc: float, title: str = "ROC") -> str:
    """Receiver operating curve from (threshold, tpr, fpr) tuples."""
    parts = _header(f"{title} (area {auc:.3f})")
    plot_w = W - 2 * MARGIN
    plot_h = H - 2 * MARGIN

    def sx(fpr):
        return MARGIN + fpr * plot_w

    def sy(tpr):
        return H - MARGIN - tpr * plot_h

    parts.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" '
        f'stroke="#bbbbbb" stroke-dasharray="5,5"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{sx(frac):.1f}" y="{H - MARGIN + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{frac:.1f}</text>'
        )
        parts.append(
            f'<text x="{MARGIN - 8}" y="{sy(frac) + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{frac:.1f}</text>'
        )
    parts.append(
        f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">false positive rate</text>'
    )
    parts.append(
        f'<text x="16" y="{H // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {H // 2})">true positive rate</text>'
    )
    ordered = sorted(points, key=lambda p: (p[2], p[1]))
    path = " ".join(f"{sx(fpr):.2f},{sy(tpr):.2f}" for _, tpr, fpr in ordered)
    parts.append(
        f'<polyline points="{path}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
