"""Report emission: iso-compression series, thresholds, and SVG plots.

SVG structure (stable, for scripted checks)::

    <svg class="ioreduce-plot" data-kind="gamma|scatter">
      <metadata>   JSON with the resolved inputs of the plot
      <g id="axes">      frame, ticks, labels
      <g id="series">    one <polyline class="series" data-label=...> per line
      <line id="break-even">   gamma = 1 (gamma plots only)
      <g id="points">    <circle class="point" data-label=... data-x data-y>
                         (scatter points also carry data-verdicts, JSON per profile)
      <g id="legend">
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence
from dataclasses import asdict
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from . import model
from .bench import BenchRecord, verdict_label

DEFAULT_GRID = tuple(float(x) for x in np.geomspace(1e-3, 1.0, 121))

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 150, 30, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def profile_dict(profile: model.SystemProfile) -> dict:
    d = asdict(profile)
    d["norm_fs_throughput"] = profile.norm_fs_throughput
    d["c_prep"] = profile.c_prep
    return d


def gamma_series(profile: model.SystemProfile, ratios: Sequence[float], grid: Sequence[float]) -> dict[float, list[tuple[float, float]]]:
    return {f: model.gamma_curve(profile, f, grid) for f in ratios}


def gamma_series_csv(profile: model.SystemProfile, series: dict[float, list[tuple[float, float]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["profile", "ratio", "norm_codec_throughput", "gamma"])
    for f, pts in series.items():
        for x, g in pts:
            w.writerow([profile.name, repr(f), repr(x), repr(g)])
    return buf.getvalue()


def thresholds(profile: model.SystemProfile, ratios: Sequence[float]) -> dict:
    fs = profile.norm_fs_throughput
    per_ratio = {}
    for f in sorted(set(list(ratios) + [0.0])):
        per_ratio[repr(f)] = model.min_codec_throughput(f, fs) if f < 1 else None
    return {
        "profile": profile_dict(profile),
        "norm_fs_throughput": fs,
        "c_prep": profile.c_prep,
        "perfect_reduction_threshold": model.perfect_reduction_threshold(fs),
        "min_codec_throughput": per_ratio,
        "io_time_simple_s": model.io_time_simple(profile),
    }


# --------------------------------------------------------------------------
# SVG


class _Axes:
    def __init__(self, xmin, xmax, ymin, ymax, xlog=True, ylog=False):
        self.xmin, self.xmax, self.ymin, self.ymax = xmin, xmax, ymin, ymax
        self.xlog, self.ylog = xlog, ylog

    def _t(self, v, lo, hi, log):
        if log:
            v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
        return (v - lo) / (hi - lo)

    def x(self, v):
        return _ML + self._t(v, self.xmin, self.xmax, self.xlog) * (_W - _ML - _MR)

    def y(self, v):
        v = min(max(v, self.ymin), self.ymax)
        return _H - _MB - self._t(v, self.ymin, self.ymax, self.ylog) * (_H - _MT - _MB)


def _frame(ax: _Axes, xlabel: str, ylabel: str, title: str) -> list[str]:
    out = ['<g id="axes" font-family="sans-serif" font-size="11">']
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    lo, hi = math.floor(math.log10(ax.xmin)), math.ceil(math.log10(ax.xmax))
    for e in range(lo, hi + 1):
        v = 10.0**e
        if ax.xmin <= v <= ax.xmax:
            px = ax.x(v)
            out.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" y2="{_H - _MB + 5}" stroke="black"/>')
            out.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" text-anchor="middle">1e{e}</text>')
    for v in np.linspace(ax.ymin, ax.ymax, 6):
        py = ax.y(v)
        out.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" y2="{py:.1f}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">{escape(ylabel)}</text>'
    )
    out.append(f'<text x="{_ML}" y="{_MT - 10}">{escape(title)}</text>')
    out.append("</g>")
    return out


def _svg(kind: str, meta: dict, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" class="ioreduce-plot" data-kind="{kind}" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">'
    )
    meta_json = escape(json.dumps(meta, sort_keys=True, default=str))
    return "\n".join([head, f"<metadata>{meta_json}</metadata>", *body, "</svg>"]) + "\n"


def _legend(entries: list[tuple[str, str]]) -> list[str]:
    out = ['<g id="legend" font-family="sans-serif" font-size="11">']
    for i, (label, color) in enumerate(entries):
        y = _MT + 14 + 16 * i
        out.append(f'<line x1="{_W - _MR + 10}" y1="{y - 4}" x2="{_W - _MR + 30}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR + 35}" y="{y}">{escape(label)}</text>')
    out.append("</g>")
    return out


def gamma_svg(profile: model.SystemProfile, series: dict[float, list[tuple[float, float]]], points: Sequence[tuple[float, float, str]] = (), meta: dict | None = None) -> str:
    """Gamma versus normalized codec throughput, one polyline per ratio."""
    xs = [x for pts in series.values() for x, _ in pts] + [p[0] for p in points]
    ys = [g for pts in series.values() for _, g in pts] + [p[1] for p in points]
    ymax = min(max(ys), 5.0) if ys else 2.0
    ax = _Axes(min(xs), max(xs), 0.0, max(ymax, 1.2))
    body = _frame(ax, "normalized codec throughput", "relative I/O time (gamma)", f"{profile.name}: iso-compression lines")
    body.append('<g id="series" fill="none" stroke-width="1.5">')
    legend = []
    for i, (f, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{ax.x(x):.2f},{ax.y(g):.2f}" for x, g in pts)
        body.append(f'<polyline class="series" data-label={quoteattr(f"f_C={f:g}")} stroke="{color}" points="{coords}"/>')
        legend.append((f"f_C = {f:g}", color))
    body.append("</g>")
    body.append(f'<line id="break-even" x1="{_ML}" y1="{ax.y(1.0):.2f}" x2="{_W - _MR}" y2="{ax.y(1.0):.2f}" stroke="black" stroke-dasharray="6,4"/>')
    body.append('<g id="points">')
    for x, y, label in points:
        body.append(
            f'<circle class="point" data-label={quoteattr(label)} data-x="{x!r}" data-y="{y!r}" '
            f'cx="{ax.x(x):.2f}" cy="{ax.y(y):.2f}" r="3" fill="black"/>'
        )
    body.append("</g>")
    body += _legend(legend)
    meta = dict(meta or {})
    meta.setdefault("profile", profile_dict(profile))
    meta.setdefault("ratios", list(series))
    return _svg("gamma", meta, body)


def scatter_svg(records: Sequence[BenchRecord], profiles: Sequence[model.SystemProfile], meta: dict | None = None) -> str:
    """Measured (normalized throughput, ratio) points with each profile's break-even curve.

    A point lies below a profile's curve exactly when it passes the
    break-even test for that profile.  Points use each record's own memcpy
    baseline; the curves are in units of the profile's baseline.
    """
    pts = [r for r in records if r.ok and r.norm_throughput > 0 and math.isfinite(r.norm_throughput)]
    xs = [r.norm_throughput for r in pts] or [1e-3, 1.0]
    xmin = min(1e-3, min(xs) / 2)
    xmax = max(1.0, max(xs) * 1.5)
    ymax = max([1.1] + [r.ratio * 1.05 for r in pts])
    ax = _Axes(xmin, xmax, 0.0, ymax)
    body = _frame(ax, "normalized codec throughput", "compression ratio f_C", "measurements vs break-even")
    body.append('<g id="series" fill="none" stroke-width="1.5">')
    legend = []
    grid = np.geomspace(xmin, min(xmax, 1.0), 200)
    for i, p in enumerate(profiles):
        color = _COLORS[i % len(_COLORS)]
        fs = p.norm_fs_throughput
        # break-even: f = 1 - fs * (1 - T) / T
        curve = [(t, 1 - fs * (1 - t) / t) for t in grid if t < 1 and 1 - fs * (1 - t) / t > 0]
        coords = " ".join(f"{ax.x(x):.2f},{ax.y(y):.2f}" for x, y in curve)
        body.append(f'<polyline class="series" data-label={quoteattr(p.name)} stroke="{color}" points="{coords}"/>')
        legend.append((f"break-even {p.name}", color))
    body.append("</g>")
    body.append('<g id="points">')
    for r in pts:
        label = f"{r.codec}/{r.preconditioner}/{r.n_threads}t/{r.data_class}"
        fill = "none" if r.status == "imported" else "black"
        body.append(
            f'<circle class="point" data-label={quoteattr(label)} data-x="{r.norm_throughput!r}" data-y="{r.ratio!r}" '
            f'data-verdicts={quoteattr(json.dumps({p.name: verdict_label(r, p) for p in profiles}))} '
            f'cx="{ax.x(r.norm_throughput):.2f}" cy="{ax.y(r.ratio):.2f}" r="3" fill="{fill}" stroke="black"/>'
        )
    body.append("</g>")
    body += _legend(legend)
    meta = dict(meta or {})
    meta.setdefault("profiles", [profile_dict(p) for p in profiles])
    return _svg("scatter", meta, body)


def markdown_summary(records: Sequence[BenchRecord], profiles: Sequence[model.SystemProfile]) -> str:
    head = "| codec | precond | threads | data | T_C [MB/s] | f_C | norm T_C | " + " | ".join(p.name for p in profiles) + " |"
    sep = "|" + "---|" * (7 + len(profiles))
    lines = [head, sep]
    for r in records:
        cells = [
            r.codec,
            r.preconditioner,
            str(r.n_threads),
            r.data_class,
            f"{r.throughput / 1e6:.1f}" if r.ok else "-",
            f"{r.ratio:.4f}" if r.ok else "-",
            f"{r.norm_throughput:.4f}" if r.ok else "-",
        ] + [verdict_label(r, p) for p in profiles]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
