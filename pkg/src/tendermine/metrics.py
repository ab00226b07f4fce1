"""Yearly supplier risk metrics and their static CSV/SVG report."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

from .records import AwardRecord, normalize_name

PathLike = Union[str, Path]

METRIC_NAMES = (
    "buyer_countries",
    "yearly_buyers",
    "buyers_moving_avg",
    "churn",
    "retention",
    "product_types",
    "lot_avg_duration_days",
    "value_deviation",
)
MOVING_AVERAGE_YEARS = 3


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class MetricPoint:
    period: int
    value: float


@dataclass(frozen=True)
class RiskMetricSeries:
    supplier_id: str
    metric_name: str
    points: tuple[MetricPoint, ...]

    def __post_init__(self):
        if self.metric_name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric_name!r}")
        periods = [p.period for p in self.points]
        if any(b <= a for a, b in zip(periods, periods[1:])):
            raise ValueError("periods must be strictly increasing")

    def as_dict(self) -> dict[int, float]:
        return {p.period: p.value for p in self.points}


def is_active(record: AwardRecord, year: int) -> bool:
    """Contract overlaps the calendar year: started by its end and not ended before its start."""
    start = record.start_date or date(record.year, 1, 1)
    return start <= date(year, 12, 31) and (record.end_date is None or record.end_date >= date(year, 1, 1))


def active_contracts(records: Iterable[AwardRecord], year: int) -> list[AwardRecord]:
    return [r for r in records if is_active(r, year)]


def _buyers(records: Iterable[AwardRecord]) -> set[str]:
    return {normalize_name(r.buyer.name) for r in records}


def z_scores(values: Sequence[float]) -> list[float]:
    """Population z-scores; all zero when the values do not vary."""
    if not values:
        return []
    mean = statistics.fmean(values)
    sd = statistics.pstdev(values)
    if sd == 0:
        return [0.0] * len(values)
    return [(v - mean) / sd for v in values]


def moving_average(yearly: dict[int, float], year: int, width: int = MOVING_AVERAGE_YEARS) -> float:
    """Trailing mean over ``width`` years; years without contracts count as zero."""
    if year - width + 1 < min(yearly):
        raise InsufficientHistory(f"{year} has fewer than {width} years of history")
    return sum(yearly.get(y, 0.0) for y in range(year - width + 1, year + 1)) / width


def compute_risk_metrics(records: Sequence[AwardRecord], supplier: str | None = None) -> list[RiskMetricSeries]:
    """The eight reconstructed metrics, one series each, over the years with contracts.

    Years where a metric is undefined (no previous-year buyers, too little
    history, no dated contracts) are left out of that series.
    """
    if not records:
        return [RiskMetricSeries(supplier or "", name, ()) for name in METRIC_NAMES]
    sid = supplier or records[0].supplier_id
    by_year: dict[int, list[AwardRecord]] = {}
    for r in records:
        by_year.setdefault(r.year, []).append(r)
    years = sorted(by_year)
    series: dict[str, list[MetricPoint]] = {name: [] for name in METRIC_NAMES}

    yearly_buyers = {y: float(len(_buyers(by_year[y]))) for y in years}
    valued = [r for r in records if r.value is not None]
    z_by_record = dict(zip((r.record_id for r in valued), z_scores([r.value.amount for r in valued])))

    for y in years:
        rs = by_year[y]
        countries = {r.buyer.country.strip().upper() for r in rs if r.buyer.country.strip()}
        series["buyer_countries"].append(MetricPoint(y, float(len(countries))))
        series["yearly_buyers"].append(MetricPoint(y, yearly_buyers[y]))
        try:
            series["buyers_moving_avg"].append(MetricPoint(y, moving_average(yearly_buyers, y)))
        except InsufficientHistory:
            pass
        previous = _buyers(by_year.get(y - 1, ()))
        if previous:
            churn = len(previous - _buyers(rs)) / len(previous)
            series["churn"].append(MetricPoint(y, churn))
            series["retention"].append(MetricPoint(y, 1.0 - churn))
        names = {name for r in rs for name in r.item_names()}
        series["product_types"].append(MetricPoint(y, float(len(names))))
        durations = [(r.end_date - r.start_date).days for r in rs if r.start_date and r.end_date]
        if durations:
            series["lot_avg_duration_days"].append(MetricPoint(y, statistics.fmean(durations)))
        zs = [z_by_record[r.record_id] for r in rs if r.record_id in z_by_record]
        if zs:
            series["value_deviation"].append(MetricPoint(y, max(zs)))

    return [RiskMetricSeries(sid, name, tuple(series[name])) for name in METRIC_NAMES]


# ---------------------------------------------------------------------------
# report

SVG_WIDTH = 480
SVG_HEIGHT = 240
SVG_MARGIN = 40


def _fmt(value: float) -> str:
    return f"{value:.6f}".rstrip("0").rstrip(".") or "0"


def series_csv(series: RiskMetricSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["period", "value"])
    for p in series.points:
        writer.writerow([p.period, _fmt(p.value)])
    return buf.getvalue()


def series_svg(series: RiskMetricSeries) -> str:
    """Line chart with fixed geometry, so equal input gives equal bytes."""
    w, h, m = SVG_WIDTH, SVG_HEIGHT, SVG_MARGIN
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<title>{series.supplier_id} {series.metric_name}</title>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
    ]
    pts = series.points
    if pts:
        x0, x1 = pts[0].period, pts[-1].period
        lo = min(0.0, min(p.value for p in pts))
        hi = max(p.value for p in pts)
        xspan = (x1 - x0) or 1
        yspan = (hi - lo) or 1.0

        def xy(p: MetricPoint) -> tuple[str, str]:
            x = m + (p.period - x0) / xspan * (w - 2 * m) if x1 != x0 else w / 2
            y = h - m - (p.value - lo) / yspan * (h - 2 * m)
            return f"{x:.2f}", f"{y:.2f}"

        coords = [xy(p) for p in pts]
        lines.append(
            '<polyline fill="none" stroke="steelblue" points="' + " ".join(f"{x},{y}" for x, y in coords) + '"/>'
        )
        for (x, y), p in zip(coords, pts):
            lines.append(f'<circle cx="{x}" cy="{y}" r="3" fill="steelblue"><title>{p.period}: {_fmt(p.value)}</title></circle>')
        lines.append(f'<text x="{m}" y="{h - m + 16}" font-size="11">{x0}</text>')
        lines.append(f'<text x="{w - m}" y="{h - m + 16}" font-size="11" text-anchor="end">{x1}</text>')
        lines.append(f'<text x="{m - 4}" y="{m}" font-size="11" text-anchor="end">{_fmt(hi)}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_report(supplier: str, metrics: Sequence[RiskMetricSeries], out_dir: PathLike) -> list[Path]:
    """Write ``<out_dir>/<supplier>/<metric>.csv`` and ``.svg``; returns the written paths."""
    target = Path(out_dir) / supplier
    target.mkdir(parents=True, exist_ok=True)
    written = []
    renderers: tuple[tuple[str, Callable[[RiskMetricSeries], str]], ...] = (("csv", series_csv), ("svg", series_svg))
    for s in sorted(metrics, key=lambda s: METRIC_NAMES.index(s.metric_name)):
        for ext, render in renderers:
            path = target / f"{s.metric_name}.{ext}"
            path.write_text(render(s), encoding="utf-8", newline="\n")
            written.append(path)
    return written
