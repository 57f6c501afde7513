"""
Serialisation and rendering of results.

JSON and CSV emitters write numbers with 12 significant digits and fixed
field order, and the SVG renderers format coordinates to two decimals, so the
same inputs always produce the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import date
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .decompose import SessionReturnSeries, WealthCurve
from .exceptions import AlignmentError, DomainError, FormatError
from .stats import Histogram, SuspicionMetrics, Thresholds, VarianceStats

SCHEMA_VERSION = 1
SERIES_HEADER = ["Date", "OvernightReturn", "IntradayReturn", "OvernightWealth", "IntradayWealth"]

SVG_NS = "http://www.w3.org/2000/svg"
ET.register_namespace("", SVG_NS)

OVERNIGHT_COLOR = "blue"
INTRADAY_COLOR = "green"
PANEL_WIDTH = 320
PANEL_HEIGHT = 220
_MARGIN = dict(left=48, right=56, top=28, bottom=24)


def _num(x):
    """Round to 12 significant digits; NaN and infinities become ``None``."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _fmt12(x) -> str:
    return "" if x is None or not math.isfinite(x) else f"{float(x):.12g}"


@dataclass(frozen=True)
class PanelSpec:
    title: str = ""
    scale: str = "log"
    overnight_color: str = OVERNIGHT_COLOR
    intraday_color: str = INTRADAY_COLOR
    mark_endpoints: bool = True
    y_floor: Optional[float] = None

    def __post_init__(self):
        if self.scale not in ("log", "linear"):
            raise DomainError(f"scale must be 'log' or 'linear', got {self.scale!r}")


@dataclass(frozen=True)
class ReportMetadata:
    instrument_id: str
    policy: str
    date_range: tuple[date, date]
    data_provenance: dict = field(default_factory=dict)
    tool_version: str = __version__
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ReportBundle:
    metadata: ReportMetadata
    curves: tuple[WealthCurve, WealthCurve]
    metrics: SuspicionMetrics
    histograms: tuple[Histogram, Histogram]
    thresholds: Thresholds = Thresholds()
    variance: Optional[VarianceStats] = None

    def __post_init__(self):
        on, intra = self.curves
        if len(on.values) != len(intra.values) or on.dates != intra.dates:
            raise AlignmentError("overnight and intraday curves must share dates")


def report_dict(bundle: ReportBundle) -> dict:
    md, m, t = bundle.metadata, bundle.metrics, bundle.thresholds
    on, intra = bundle.curves
    hon, hin = bundle.histograms
    v = bundle.variance
    return {
        "schemaVersion": SCHEMA_VERSION,
        "metadata": {
            "instrumentId": md.instrument_id,
            "policy": md.policy,
            "dateRange": [md.date_range[0].isoformat(), md.date_range[1].isoformat()],
            "tradingDays": len(on.dates),
            "dataProvenance": {k: md.data_provenance[k] for k in sorted(md.data_provenance)},
            "toolVersion": md.tool_version,
            "seed": md.seed,
        },
        "thresholds": {
            "alpha": _num(t.alpha),
            "minStraightness": _num(t.min_straightness),
            "nPermutations": int(t.n_permutations),
        },
        "finalOvernightWealth": _num(on.final),
        "finalIntradayWealth": _num(intra.final),
        "metrics": {
            "cumIntraday": _num(m.cum_intraday),
            "cumOvernight": _num(m.cum_overnight),
            "logWealthGap": _num(m.log_wealth_gap),
            # R^2 of log wealth on day index: our measure of how consistent the trend is
            "straightnessOvernight": _num(m.straightness_overnight),
            "straightnessIntraday": _num(m.straightness_intraday),
            "permutationStatistic": _num(m.statistic),
            "pValue": _num(m.p_value),
            "flagged": bool(m.flagged),
        },
        "variance": None if v is None else {
            "varOvernight": _num(v.var_overnight),
            "varIntraday": _num(v.var_intraday),
            "intradayFraction": _num(v.intraday_fraction),
        },
        "histograms": {
            "edges": [_num(e) for e in hon.edges],
            "overnight": [int(c) for c in hon.counts],
            "intraday": [int(c) for c in hin.counts],
        },
    }


def emit_report_json(bundle: ReportBundle) -> str:
    return json.dumps(report_dict(bundle), indent=2, allow_nan=False) + "\n"


def emit_series_csv(srs: SessionReturnSeries, curves: tuple[WealthCurve, WealthCurve]) -> str:
    """One row per date: both returns and both wealth values after that date.

    The undefined first overnight return is written as an empty field.
    """
    n = len(srs.dates)
    if n == 0:
        raise AlignmentError("empty series")
    on, intra = curves
    if not (len(srs.overnight) == len(srs.intraday) == n
            and len(on.values) == len(intra.values) == n + 1):
        raise AlignmentError(
            f"series has {n} dates but curves have {len(on.values)}/{len(intra.values)} points")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SERIES_HEADER)
    for i, d in enumerate(srs.dates):
        w.writerow([d.isoformat(), _fmt12(srs.overnight[i]), _fmt12(srs.intraday[i]),
                    _fmt12(on.values[i + 1]), _fmt12(intra.values[i + 1])])
    return out.getvalue()


def parse_series_csv(text: str) -> dict:
    """Read a document written by :func:`emit_series_csv` back into arrays."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != SERIES_HEADER:
        raise FormatError(f"expected header {','.join(SERIES_HEADER)!r}")
    body = rows[1:]

    def col(i):
        return np.array([float(r[i]) if r[i] else np.nan for r in body])

    return {
        "dates": [date.fromisoformat(r[0]) for r in body],
        "overnight": col(1),
        "intraday": col(2),
        "overnight_wealth": col(3),
        "intraday_wealth": col(4),
    }


def _c(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _svg_root(width, height, **attrs):
    root = ET.Element(f"{{{SVG_NS}}}svg", {"version": "1.1", "width": _c(width),
                                           "height": _c(height),
                                           "viewBox": f"0 0 {_c(width)} {_c(height)}"})
    for k, v in attrs.items():
        root.set(k.replace("_", "-"), str(v))
    return root


def _sub(parent, tag, text=None, **attrs):
    el = ET.SubElement(parent, f"{{{SVG_NS}}}{tag}",
                       {k.rstrip("_").replace("_", "-"): str(v) for k, v in attrs.items()})
    if text is not None:
        el.text = text
    return el


def _to_string(root) -> str:
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def _log_ticks(lo, hi):
    """Powers of ten (as log10 exponents) inside ``[lo, hi]``, always including 1."""
    ticks = set(range(math.ceil(lo), math.floor(hi) + 1))
    ticks.add(0)
    return sorted(t for t in ticks if lo <= t <= hi)


def _tick_label(value: float) -> str:
    return f"{value:g}"


def render_wealth_panel_svg(curves: tuple[WealthCurve, WealthCurve], spec: PanelSpec = PanelSpec()) -> str:
    """Draw both wealth curves in one panel.

    Log panels plot wealth on a log10 axis; linear panels plot cumulative
    return (wealth minus 1), floored at ``spec.y_floor`` when given.
    """
    on, intra = curves
    if len(on.values) != len(intra.values):
        raise AlignmentError("curves must have the same length")
    if spec.scale == "log":
        if np.any(on.values <= 0) or np.any(intra.values <= 0):
            raise DomainError("log scale requires positive wealth values")
        ys = [np.log10(on.values), np.log10(intra.values)]
        lo = min(0.0, ys[0].min(), ys[1].min())
        hi = max(0.0, ys[0].max(), ys[1].max())
        pad = max(0.05 * (hi - lo), 0.1)
        lo, hi = lo - pad, hi + pad
        ticks = [(t, _tick_label(10.0 ** t)) for t in _log_ticks(lo, hi)]
    else:
        ys = [on.values - 1.0, intra.values - 1.0]
        lo = min(0.0, ys[0].min(), ys[1].min())
        hi = max(0.0, ys[0].max(), ys[1].max())
        pad = max(0.05 * (hi - lo), 0.05)
        lo = spec.y_floor if spec.y_floor is not None else lo - pad
        hi = hi + pad
        ticks = [(t, f"{t * 100:g}%") for t in sorted({lo, 0.0}) if lo <= t <= hi]

    w, h = PANEL_WIDTH, PANEL_HEIGHT
    x0, x1 = _MARGIN["left"], w - _MARGIN["right"]
    y0, y1 = h - _MARGIN["bottom"], _MARGIN["top"]
    n = len(on.values)

    def px(i):
        return x0 + (x1 - x0) * (i / (n - 1) if n > 1 else 0.0)

    def py(v):
        return y0 - (y0 - y1) * (v - lo) / (hi - lo)

    root = _svg_root(w, h)
    _sub(root, "title", spec.title)
    _sub(root, "rect", x=0, y=0, width=w, height=h, fill="white")
    _sub(root, "text", spec.title, x=_c(w / 2), y=16, text_anchor="middle",
         font_size=12, font_family="sans-serif", class_="panel-title")
    plot = _sub(root, "g", class_="plot", data_scale=spec.scale,
                data_y_min=repr(float(lo)), data_y_max=repr(float(hi)))
    _sub(plot, "rect", x=_c(x0), y=_c(y1), width=_c(x1 - x0), height=_c(y0 - y1),
         fill="none", stroke="black", stroke_width="0.5")
    for t, label in ticks:
        _sub(plot, "line", x1=_c(x0), x2=_c(x1), y1=_c(py(t)), y2=_c(py(t)),
             stroke="#cccccc", stroke_width="0.5")
        _sub(plot, "text", label, x=_c(x0 - 4), y=_c(py(t) + 3), text_anchor="end",
             font_size=9, font_family="sans-serif", class_="tick")
    for values, color, label in ((ys[0], spec.overnight_color, "overnight"),
                                 (ys[1], spec.intraday_color, "intraday")):
        points = " ".join(f"{_c(px(i))},{_c(py(v))}" for i, v in enumerate(values))
        _sub(plot, "polyline", points=points, fill="none", stroke=color,
             stroke_width="1", class_=label)
    if spec.mark_endpoints:
        for curve, values, color in ((on, ys[0], spec.overnight_color),
                                     (intra, ys[1], spec.intraday_color)):
            text = (f"{curve.final:.2f}" if spec.scale == "log"
                    else f"{(curve.final - 1.0) * 100:.2f}%")
            _sub(plot, "text", text, x=_c(x1 + 3), y=_c(py(values[-1]) + 3), fill=color,
                 font_size=9, font_family="sans-serif", class_=f"endpoint {curve.label}".strip())
    return _to_string(root)


def render_grid_svg(panels: Sequence[str], columns: int = 3, cell_width: float = PANEL_WIDTH,
                    cell_height: float = PANEL_HEIGHT, margin: float = 10.0) -> str:
    """Lay rendered panels out row-major in a grid of fixed-size cells."""
    if not panels:
        raise DomainError("need at least one panel")
    if columns < 1:
        raise DomainError("columns must be positive")
    columns = min(columns, len(panels))
    rows = -(-len(panels) // columns)
    root = _svg_root(2 * margin + columns * cell_width, 2 * margin + rows * cell_height,
                     data_rows=rows, data_columns=columns)
    for k, doc in enumerate(panels):
        panel = ET.fromstring(doc.encode("utf-8") if isinstance(doc, str) else doc)
        r, c = divmod(k, columns)
        panel.set("x", _c(margin + c * cell_width))
        panel.set("y", _c(margin + r * cell_height))
        panel.set("width", _c(cell_width))
        panel.set("height", _c(cell_height))
        root.append(panel)
    return _to_string(root)


def render_histogram_svg(hist_a: Histogram, hist_b: Histogram,
                         labels: tuple[str, str] = ("overnight", "intraday"),
                         colors: tuple[str, str] = (OVERNIGHT_COLOR, INTRADAY_COLOR),
                         title: str = "") -> str:
    """Overlay two histograms as step outlines on shared edges.

    Edge bins already hold under/overflow and are drawn like any other bin.
    """
    if not hist_a.same_edges(hist_b):
        raise AlignmentError("histograms must share bin edges")
    edges = hist_a.edges
    w, h = 2 * PANEL_WIDTH, PANEL_HEIGHT + 40
    x0, x1 = _MARGIN["left"], w - 16
    y0, y1 = h - 36, 28
    top = max(1, int(hist_a.counts.max(initial=0)), int(hist_b.counts.max(initial=0)))

    def px(e):
        return x0 + (x1 - x0) * (e - edges[0]) / (edges[-1] - edges[0])

    def py(c):
        return y0 - (y0 - y1) * c / top

    root = _svg_root(w, h)
    _sub(root, "title", title or f"{labels[0]} vs {labels[1]}")
    _sub(root, "rect", x=0, y=0, width=w, height=h, fill="white")
    _sub(root, "rect", x=_c(x0), y=_c(y1), width=_c(x1 - x0), height=_c(y0 - y1),
         fill="none", stroke="black", stroke_width="0.5")
    for e in (edges[0], 0.0, edges[-1]):
        if edges[0] <= e <= edges[-1]:
            _sub(root, "text", f"{e * 100:g}%", x=_c(px(e)), y=_c(y0 + 14),
                 text_anchor="middle", font_size=9, font_family="sans-serif", class_="tick")
    for k, (hist, label, color) in enumerate(zip((hist_a, hist_b), labels, colors)):
        pts = [(px(edges[0]), py(0))]
        for i, c in enumerate(hist.counts):
            pts += [(px(edges[i]), py(c)), (px(edges[i + 1]), py(c))]
        pts.append((px(edges[-1]), py(0)))
        _sub(root, "polyline", points=" ".join(f"{_c(x)},{_c(y)}" for x, y in pts),
             fill="none", stroke=color, stroke_width="1", class_=f"hist {label}")
        _sub(root, "text", label, x=_c(x0 + 8), y=_c(y1 + 14 + 12 * k), fill=color,
             font_size=10, font_family="sans-serif", class_="legend")
    return _to_string(root)
