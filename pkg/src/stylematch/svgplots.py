"""Minimal static SVG charts for the plot-data series.

Hand-rolled SVG keeps the optional chart output byte-deterministic and
dependency-free; anything fancier should start from the CSV series in
plots/ instead.
"""

from __future__ import annotations

from pathlib import Path

WIDTH, HEIGHT = 480, 320
MARGIN = 40


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span <= 0:
        span = 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def _frame(title: str, body: list[str]) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#888"/>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def histogram_svg(title: str, edges, counts) -> str:
    if len(counts) == 0:
        return _frame(title, [])
    peak = max(max(counts), 1)
    xs = _scale(edges, edges[0], edges[-1], MARGIN, WIDTH - MARGIN)
    body = []
    for i, count in enumerate(counts):
        height = (HEIGHT - 2 * MARGIN) * count / peak
        body.append(
            f'<rect x="{xs[i]:.2f}" y="{HEIGHT - MARGIN - height:.2f}" '
            f'width="{max(xs[i + 1] - xs[i], 1):.2f}" height="{height:.2f}" '
            f'fill="#4477aa" stroke="white" stroke-width="0.5"/>'
        )
    return _frame(title, body)


def line_svg(title: str, x, y) -> str:
    if len(x) == 0:
        return _frame(title, [])
    y_hi = max(max(y), 1e-12)
    xs = _scale(x, min(x), max(x), MARGIN, WIDTH - MARGIN)
    ys = _scale(y, 0.0, y_hi, HEIGHT - MARGIN, MARGIN)
    points = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(xs, ys))
    body = [f'<polyline points="{points}" fill="none" stroke="#aa3377" stroke-width="1.5"/>']
    return _frame(title, body)


def scatter_svg(title: str, x, y) -> str:
    if len(x) == 0:
        return _frame(title, [])
    x_lo, x_hi = min(x), max(x)
    y_lo, y_hi = min(y), max(y)
    xs = _scale(x, x_lo, x_hi, MARGIN, WIDTH - MARGIN)
    ys = _scale(y, y_lo, y_hi, HEIGHT - MARGIN, MARGIN)
    body = [
        f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="#228833" fill-opacity="0.6"/>'
        for px, py in zip(xs, ys)
    ]
    return _frame(title, body)


def render_describe_svgs(describe_result, out_dir: str | Path) -> list[str]:
    """Histogram and KDE charts per variable from a DescribeResult."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for summary in describe_result.variables:
        hist_path = out_dir / f"{summary.name}_hist.svg"
        hist_path.write_text(
            histogram_svg(f"{summary.name} histogram", list(summary.hist_edges), list(summary.hist_counts))
        )
        written.append(str(hist_path))
        if summary.kde_x is not None:
            kde_path = out_dir / f"{summary.name}_kde.svg"
            kde_path.write_text(
                line_svg(f"{summary.name} density", list(summary.kde_x), list(summary.kde_y))
            )
            written.append(str(kde_path))
    return written


def render_regression_svgs(suite, out_dir: str | Path) -> list[str]:
    """Residual-vs-fitted scatter per model."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for model_id, entry in sorted(suite.models.items()):
        pairs = entry.diagnostics.residuals_vs_fitted
        path = out_dir / f"{model_id}_residuals.svg"
        path.write_text(
            scatter_svg(
                f"{model_id} residuals vs fitted",
                [float(v) for v in pairs[:, 0]],
                [float(v) for v in pairs[:, 1]],
            )
        )
        written.append(str(path))
    return written
