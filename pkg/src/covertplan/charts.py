"""Minimal deterministic SVG polyline charts (no plotting dependency, so
rerunning a command reproduces the file byte for byte)."""

from __future__ import annotations

import math

_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def line_chart_svg(
    path,
    series: list[tuple[str, list[float], list[float]]],
    x_label: str,
    y_label: str,
    title: str = "",
    log_x: bool = False,
) -> None:
    """Write a polyline chart; ``series`` holds (label, xs, ys) triples."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("no data to chart")
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    x_lo, x_hi = min(map(tx, xs_all)), max(map(tx, xs_all))
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(v: float) -> float:
        return _MARGIN_L + plot_w * (tx(v) - x_lo) / (x_hi - x_lo)

    def py(v: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
        f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 10}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
        f'<text x="16" y="{_HEIGHT // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_HEIGHT // 2})">{y_label}</text>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = _MARGIN_L + plot_w * (t - x_lo) / (x_hi - x_lo)
        label = f"1e{t:.1f}" if log_x else f"{t:.3g}"
        parts.append(f'<line x1="{_fmt(x)}" y1="{_MARGIN_T + plot_h}" '
                     f'x2="{_fmt(x)}" y2="{_MARGIN_T + plot_h + 5}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_MARGIN_T + plot_h + 18}" '
                     f'text-anchor="middle" font-size="10">{label}</text>')
    for t in _ticks(y_lo, y_hi):
        y = _MARGIN_T + plot_h * (1.0 - (t - y_lo) / (y_hi - y_lo))
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(y)}" '
                     f'x2="{_MARGIN_L}" y2="{_fmt(y)}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{_fmt(y)}" text-anchor="end" '
                     f'font-size="10">{t:.4g}</text>')
    for idx, (label, xs, ys) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = _MARGIN_T + 14 + 14 * idx
        parts.append(f'<line x1="{_MARGIN_L + plot_w - 130}" y1="{ly - 4}" '
                     f'x2="{_MARGIN_L + plot_w - 110}" y2="{ly - 4}" stroke="{color}" '
                     'stroke-width="1.5"/>')
        parts.append(f'<text x="{_MARGIN_L + plot_w - 105}" y="{ly}" '
                     f'font-size="10">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
