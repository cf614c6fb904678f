"""Dependency-free SVG figures for the three training diagnostics.

Figures are deterministic text, so tests can diff them and parse them back.
Machine-checkable quantities (baseline heights, worst-seed bars, band
envelopes) are mirrored into `data-*` attributes in full float precision;
pixel coordinates are rounded for readability only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIG_WIDTH = 760
PANEL_HEIGHT = 190
MARGIN_LEFT = 64
MARGIN_RIGHT = 24
MARGIN_TOP = 34
PANEL_GAP = 40

SEED_COLORS = ("#9ecae1", "#a1d99b", "#fdae6b", "#bcbddc", "#fc9272",
               "#c7e9c0", "#9e9ac8", "#fdd0a2")
HEAD_COLORS = ("#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b")
MEAN_COLOR = "#222222"


@dataclass(frozen=True)
class Axis:
    """Linear map from data values to pixel coordinates."""

    lo: float
    hi: float
    px_lo: float
    px_hi: float

    def to_px(self, value: float) -> float:
        if self.hi == self.lo:
            return 0.5 * (self.px_lo + self.px_hi)
        frac = (value - self.lo) / (self.hi - self.lo)
        return self.px_lo + frac * (self.px_hi - self.px_lo)


def _finite(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    return arr[np.isfinite(arr)]

def _value_range(values, pad: float = 0.06) -> tuple:
    arr = _finite(values)
    if arr.size == 0:
        return 0.0, 1.0
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _y_axis(values, top: float, pad: float = 0.06) -> Axis:
    lo, hi = _value_range(values, pad)
    return Axis(lo=lo, hi=hi, px_lo=top + PANEL_HEIGHT, px_hi=top)


def _ticks(axis: Axis, count: int = 4) -> list:
    return [axis.lo + (axis.hi - axis.lo) * i / count for i in range(count + 1)]


def _polyline(xs, ys, x_axis: Axis, y_axis: Axis, color: str, width: float,
              css_class: str, dashed: bool = False, extra: str = "") -> str:
    pts = " ".join(f"{x_axis.to_px(x):.2f},{y_axis.to_px(y):.2f}"
                   for x, y in zip(xs, ys) if math.isfinite(float(y)))
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    return (f'<polyline class="{css_class}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{dash}{extra} points="{pts}"/>')


def _text(x: float, y: float, content: str, size: int = 12, anchor: str = "middle") -> str:
    return (f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}">{content}</text>')


def _panel_frame(title: str, top: float, x_axis: Axis, y_axis: Axis,
                 x_label: str = "") -> list:
    left, right = x_axis.px_lo, x_axis.px_hi
    bottom = top + PANEL_HEIGHT
    parts = [_text((left + right) / 2, top - 8, title, size=13)]
    parts.append(f'<rect x="{left}" y="{top}" width="{right - left}" '
                 f'height="{PANEL_HEIGHT}" fill="none" stroke="#888" stroke-width="1"/>')
    for tick in _ticks(y_axis):
        py = y_axis.to_px(tick)
        parts.append(f'<line x1="{left - 4}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" '
                     f'stroke="#888" stroke-width="1"/>')
        parts.append(_text(left - 8, py + 4, f"{tick:.3g}", size=10, anchor="end"))
    if x_label:
        parts.append(_text((left + right) / 2, bottom + 26, x_label, size=11))
    return parts


def _baseline(y_value: float, x_axis: Axis, y_axis: Axis, label: str) -> str:
    py = y_axis.to_px(y_value)
    return (f'<line class="baseline" data-value="{y_value!r}" '
            f'x1="{x_axis.px_lo}" y1="{py:.2f}" x2="{x_axis.px_hi}" y2="{py:.2f}" '
            f'stroke="#555" stroke-width="1" stroke-dasharray="6 4"/>'
            + _text(x_axis.px_hi - 4, py - 4, label, size=10, anchor="end"))


def _svg_document(parts: list, height: float) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{FIG_WIDTH}" '
            f'height="{height:.0f}" viewBox="0 0 {FIG_WIDTH} {height:.0f}">')
    body = "\n".join(['<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>'] + parts)
    return f"{head}\n{body}\n</svg>\n"


def _require_columns(artifacts, names) -> list:
    """Load every artifact's records, failing loudly on a missing column."""
    loaded = []
    for art in artifacts:
        records = art.records()
        for name in names:
            if name not in records:
                raise ValueError(f"missing column {name!r} in {art.csv_path}")
        loaded.append(records)
    return loaded


def _curve_panel(title: str, top: float, runs: list, column: str,
                 baselines=(), x_label: str = "") -> list:
    """One stacked panel: thin per-seed traces plus the across-seed mean."""
    xs = runs[0]["update"]
    curves = [r[column] for r in runs]
    spread = list(curves) + [[b for b, _ in baselines]]
    x_axis = Axis(lo=float(xs.min()), hi=float(max(xs.max(), 1)),
                  px_lo=MARGIN_LEFT, px_hi=FIG_WIDTH - MARGIN_RIGHT)
    y_axis = _y_axis(np.concatenate([_finite(c) for c in spread]) if spread else [0.0], top)

    parts = [f'<g class="panel" id="panel-{column}">']
    parts.extend(_panel_frame(title, top, x_axis, y_axis, x_label))
    for i, curve in enumerate(curves):
        parts.append(_polyline(xs, curve, x_axis, y_axis,
                               SEED_COLORS[i % len(SEED_COLORS)], 1.0, "seed-trace"))
    if len(curves) > 1:
        mean_curve = np.nanmean(np.stack(curves), axis=0)
        parts.append(_polyline(xs, mean_curve, x_axis, y_axis, MEAN_COLOR, 2.0, "mean-trace"))
    else:
        parts.append(_polyline(xs, curves[0], x_axis, y_axis, MEAN_COLOR, 2.0, "mean-trace"))
    for value, label in baselines:
        parts.append(_baseline(value, x_axis, y_axis, label))
    parts.append("</g>")
    return parts


def emit_triad_figure(artifacts, out_path=None) -> str:
    """Return / hack-rate / router-entropy triad across seeds (one mode).

    Dashed baselines mark the 1/K random-routing rate and the ln K entropy
    ceiling for K = 4 heads.
    """
    if not artifacts:
        raise ValueError("no artifacts given")
    runs = _require_columns(artifacts, ("update", "mean_return", "hack_rate",
                                        "router_entropy"))
    parts = []
    top = MARGIN_TOP
    parts.extend(_curve_panel("episodic return", top, runs, "mean_return"))
    top += PANEL_HEIGHT + PANEL_GAP
    parts.extend(_curve_panel("hack rate", top, runs, "hack_rate",
                              baselines=((0.25, "random 1/4"),)))
    top += PANEL_HEIGHT + PANEL_GAP
    parts.extend(_curve_panel("router entropy", top, runs, "router_entropy",
                              baselines=((math.log(4.0), "max ln 4"),),
                              x_label="update"))
    svg = _svg_document(parts, top + PANEL_HEIGHT + 48)
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


def emit_error_routing_figure(artifacts, out_path=None) -> str:
    """Return plus per-head mean routing weight with +-1 std bands."""
    if not artifacts:
        raise ValueError("no artifacts given")
    first = artifacts[0].records()
    head_cols = sorted((c for c in first if c.startswith("w_mean_")),
                       key=lambda c: int(c.rsplit("_", 1)[1]))
    if not head_cols:
        raise ValueError(f"missing column 'w_mean_0' in {artifacts[0].csv_path}")
    runs = _require_columns(artifacts, ("update", "mean_return") + tuple(head_cols))

    parts = []
    top = MARGIN_TOP
    parts.extend(_curve_panel("episodic return", top, runs, "mean_return"))
    top += PANEL_HEIGHT + PANEL_GAP

    xs = runs[0]["update"]
    x_axis = Axis(lo=float(xs.min()), hi=float(max(xs.max(), 1)),
                  px_lo=MARGIN_LEFT, px_hi=FIG_WIDTH - MARGIN_RIGHT)
    y_axis = Axis(lo=-0.02, hi=1.02, px_lo=top + PANEL_HEIGHT, px_hi=top)

    parts.append('<g class="panel" id="panel-weights">')
    parts.extend(_panel_frame("mean routing weight per head", top, x_axis, y_axis,
                              x_label="update"))
    for i, col in enumerate(head_cols):
        stack = np.stack([r[col] for r in runs])
        mean = np.nanmean(stack, axis=0)
        std = np.nanstd(stack, axis=0, ddof=1) if stack.shape[0] > 1 else np.zeros_like(mean)
        upper, lower = mean + std, mean - std
        color = HEAD_COLORS[i % len(HEAD_COLORS)]
        up_pts = [f"{x_axis.to_px(x):.2f},{y_axis.to_px(y):.2f}" for x, y in zip(xs, upper)]
        lo_pts = [f"{x_axis.to_px(x):.2f},{y_axis.to_px(y):.2f}"
                  for x, y in zip(xs[::-1], lower[::-1])]
        data_up = ",".join(repr(float(v)) for v in upper)
        data_lo = ",".join(repr(float(v)) for v in lower)
        parts.append(f'<polygon class="band" data-head="{i}" data-upper="{data_up}" '
                     f'data-lower="{data_lo}" fill="{color}" fill-opacity="0.18" '
                     f'stroke="none" points="{" ".join(up_pts + lo_pts)}"/>')
        parts.append(_polyline(xs, mean, x_axis, y_axis, color, 2.0, "weight-mean",
                               extra=f' data-head="{i}"'))
        parts.append(_text(x_axis.px_hi - 6, y_axis.to_px(mean[-1]) - 4,
                           f"head {i}", size=10, anchor="end"))
    parts.append("</g>")
    svg = _svg_document(parts, top + PANEL_HEIGHT + 48)
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


def emit_reliability_figure(artifacts_by_condition: dict, out_path=None,
                            window_fraction: float = 0.1) -> str:
    """End-of-training reliability across conditions, plus the variance ablation.

    Top panel: per-seed trailing-window returns, a diamond and error bar at
    mean +- std, and a horizontal bar at the worst seed of each condition.
    Bottom panel: within-batch long-head advantage variance curves per
    condition, shown for inspection without any separation claim.
    """
    if len(artifacts_by_condition) < 2:
        raise ValueError("reliability figure needs at least 2 conditions")
    from .harness import condition_summary  # local import to avoid a cycle

    conditions = list(artifacts_by_condition.keys())
    summaries = {name: condition_summary(arts, window_fraction)
                 for name, arts in artifacts_by_condition.items()}

    top = MARGIN_TOP
    all_vals = np.concatenate([np.asarray(s.per_seed) for s in summaries.values()])
    pad_vals = np.concatenate([all_vals,
                               [s.mean + s.std for s in summaries.values()],
                               [s.mean - s.std for s in summaries.values()]])
    y_axis = _y_axis(pad_vals, top, pad=0.12)
    x_axis = Axis(lo=-0.5, hi=len(conditions) - 0.5,
                  px_lo=MARGIN_LEFT, px_hi=FIG_WIDTH - MARGIN_RIGHT)

    parts = ['<g class="panel" id="panel-reliability">']
    parts.extend(_panel_frame(f"trailing-window return (last {window_fraction:.0%})",
                              top, x_axis, y_axis))
    for ci, name in enumerate(conditions):
        summary = summaries[name]
        color = HEAD_COLORS[ci % len(HEAD_COLORS)]
        cx = x_axis.to_px(ci)
        for si, val in enumerate(summary.per_seed):
            jitter = (si - (len(summary.per_seed) - 1) / 2) * 7.0
            parts.append(f'<circle class="seed-point" data-condition="{name}" '
                         f'cx="{cx + jitter:.2f}" cy="{y_axis.to_px(val):.2f}" r="3.5" '
                         f'fill="{color}" fill-opacity="0.75"/>')
        y_mean = y_axis.to_px(summary.mean)
        y_up = y_axis.to_px(summary.mean + summary.std)
        y_dn = y_axis.to_px(summary.mean - summary.std)
        parts.append(f'<line class="error-bar" data-condition="{name}" '
                     f'data-mean="{summary.mean!r}" data-std="{summary.std!r}" '
                     f'x1="{cx + 24:.2f}" y1="{y_up:.2f}" x2="{cx + 24:.2f}" y2="{y_dn:.2f}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<path class="mean-marker" data-condition="{name}" '
                     f'data-mean="{summary.mean!r}" '
                     f'd="M {cx + 24:.2f} {y_mean - 6:.2f} l 6 6 l -6 6 l -6 -6 Z" '
                     f'fill="{color}"/>')
        y_worst = y_axis.to_px(summary.worst)
        parts.append(f'<line class="worst-bar" data-condition="{name}" '
                     f'data-value="{summary.worst!r}" '
                     f'x1="{cx - 40:.2f}" y1="{y_worst:.2f}" x2="{cx + 40:.2f}" '
                     f'y2="{y_worst:.2f}" stroke="{color}" stroke-width="3"/>')
        parts.append(_text(cx, top + PANEL_HEIGHT + 16, name, size=11))
    parts.append("</g>")

    top += PANEL_HEIGHT + PANEL_GAP
    var_runs = {name: _require_columns(arts, ("update", "long_adv_var"))
                for name, arts in artifacts_by_condition.items()}
    xs = next(iter(var_runs.values()))[0]["update"]
    var_stack = np.concatenate([_finite(r["long_adv_var"])
                                for runs in var_runs.values() for r in runs])
    vx_axis = Axis(lo=float(xs.min()), hi=float(max(xs.max(), 1)),
                   px_lo=MARGIN_LEFT, px_hi=FIG_WIDTH - MARGIN_RIGHT)
    vy_axis = _y_axis(var_stack if var_stack.size else [0.0], top)
    parts.append('<g class="panel" id="panel-long-adv-var">')
    parts.extend(_panel_frame("within-batch long-head advantage variance", top,
                              vx_axis, vy_axis, x_label="update"))
    for ci, (name, runs) in enumerate(var_runs.items()):
        mean_curve = np.nanmean(np.stack([r["long_adv_var"] for r in runs]), axis=0)
        parts.append(_polyline(runs[0]["update"], mean_curve, vx_axis, vy_axis,
                               HEAD_COLORS[ci % len(HEAD_COLORS)], 2.0, "var-curve",
                               extra=f' data-condition="{name}"'))
    parts.append("</g>")

    svg = _svg_document(parts, top + PANEL_HEIGHT + 48)
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg
