"""Schweder-Spjotvoll p-value plots: sorted p against rank, plus uniformity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

KS_CRIT_5PCT = 1.358

SVG_WIDTH, SVG_HEIGHT = 640, 480
_MARGIN = 48


@dataclass(frozen=True)
class PPlotSeries:
    points: tuple[tuple[int, float], ...]

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def reference_slope(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def pvalues(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


@dataclass(frozen=True)
class UniformityDiagnostics:
    ks_stat: float
    fitted_slope: float
    # None when m < 5 (too few points for the KS cut-off)
    near_null: Optional[bool]


def pplot_points(ps: Sequence[float]) -> PPlotSeries:
    ps = [float(p) for p in ps]
    if not ps:
        raise ValueError("need at least one p-value")
    bad = [p for p in ps if not 0.0 < p <= 1.0]
    if bad:
        raise ValueError(f"p-values must lie in (0, 1], got {bad[:3]}")
    ordered = sorted(ps)  # sorted() is stable
    return PPlotSeries(tuple((i + 1, p) for i, p in enumerate(ordered)))


def uniformity_diagnostics(series: PPlotSeries) -> UniformityDiagnostics:
    """KS distance to U(0, 1) and least-squares slope through the origin of p on rank."""
    p = series.pvalues
    m = series.m
    i = np.arange(1, m + 1)
    ks = float(max((i / m - p).max(), (p - (i - 1) / m).max()))
    slope = float((i * p).sum() / (i * i).sum())
    near_null = None if m < 5 else ks < KS_CRIT_5PCT / math.sqrt(m)
    return UniformityDiagnostics(ks, slope, near_null)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def render_csv(series: PPlotSeries) -> bytes:
    return ("rank,p\n" + "".join(f"{r},{_fmt(p)}\n" for r, p in series.points)).encode()


def render_svg(series: PPlotSeries, title: str = "p-value plot") -> bytes:
    m = series.m
    w, h = SVG_WIDTH - 2 * _MARGIN, SVG_HEIGHT - 2 * _MARGIN

    def sx(rank):
        return _MARGIN + w * rank / (m + 1)

    def sy(p):
        return SVG_HEIGHT - _MARGIN - h * p

    esc = (title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<title>{esc}</title>',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{SVG_HEIGHT - _MARGIN}" x2="{SVG_WIDTH - _MARGIN}" '
        f'y2="{SVG_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{SVG_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<text x="{SVG_WIDTH / 2:g}" y="{SVG_HEIGHT - 12}" text-anchor="middle" font-size="12">rank</text>',
        f'<text x="14" y="{SVG_HEIGHT / 2:g}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {SVG_HEIGHT / 2:g})">p</text>',
        # reference line p = rank / (m + 1), from the origin to rank m + 1
        f'<line class="reference" x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(m + 1):.2f}" '
        f'y2="{sy((m + 1) * series.reference_slope):.2f}" stroke="gray" stroke-dasharray="4 4"/>',
    ]
    for rank, p in series.points:
        out.append(f'<circle cx="{sx(rank):.2f}" cy="{sy(p):.2f}" r="2.5" fill="steelblue"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode()


def render(series: PPlotSeries, format: str) -> bytes:
    if format == "csv":
        return render_csv(series)
    if format == "svg":
        return render_svg(series)
    raise ValueError(f"unknown format {format!r}; expected 'csv' or 'svg'")


def count_bars_csv(labels: Sequence[str], counts: Sequence[int]) -> bytes:
    """Bar-chart sidecar data, e.g. reported p-value counts per study."""
    if len(labels) != len(counts):
        raise ValueError("labels and counts differ in length")
    rows = "".join(f"{label},{int(c)}\n" for label, c in zip(labels, counts))
    return ("label,count\n" + rows).encode()


def read_pvalue_csv(text: str) -> list[float]:
    """p-values from a CSV whose header has a ``p`` column, or from one value per line."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    header = [h.strip() for h in lines[0].split(",")]
    if "p" in header:
        col = header.index("p")
        return [float(ln.split(",")[col]) for ln in lines[1:]]
    return [float(ln.split(",")[0]) for ln in lines]
