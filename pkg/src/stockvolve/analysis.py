"""Empirical pipeline: price CSVs -> relative prices -> trend segments.

A stock's price divided by an index price is its relative price; on a
half-logarithmic (Fisher-Pry) plot, stretches of constant competitive
(dis)advantage appear as straight lines.  Segmentation minimizes total
squared error plus a per-breakpoint penalty by exact dynamic programming
over per-segment least-squares line fits, then (by default) fine-tunes each
breakpoint with a continuity-constrained local refit: adjacent price trends
join continuously, and the free-intercept segment cost alone localizes the
join point only loosely.
"""

import csv
import datetime as _dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptySeries,
    InvalidPenalty,
    NonPositiveValue,
    NoOverlap,
    ParseError,
    TooShort,
)

__all__ = [
    "PriceSeries",
    "TrendSegment",
    "load_price_csv",
    "align",
    "relative_price",
    "fisher_pry_transform",
    "years_from_dates",
    "segment_trends",
    "optimal_partition",
    "trend_report",
    "format_trend_report",
    "DAYS_PER_YEAR",
]

logger = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class PriceSeries:
    """Dated positive prices for one instrument."""

    dates: tuple
    prices: np.ndarray
    label: str = ""
    dropped_rows: int = 0

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != prices.size:
            raise ValueError("dates and prices must have equal length")
        if np.any(prices <= 0):
            raise ValueError("prices must be strictly positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")

    def __len__(self) -> int:
        return self.prices.size


def load_price_csv(path, date_column: str = "Date",
                   price_column: str = "Close", label: str = "") -> PriceSeries:
    """Read a dated price series; drops missing/non-positive prices with a count.

    Dates must be ISO-8601 (YYYY-MM-DD).  Rows are sorted by date; duplicate
    dates or malformed fields raise ParseError with the line number.
    """
    rows = []
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        try:
            d_idx = header.index(date_column)
            p_idx = header.index(price_column)
        except ValueError:
            raise ParseError(
                f"missing column: need {date_column!r} and {price_column!r}, "
                f"file has {header}", line=1
            ) from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(d_idx, p_idx):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                                 line=lineno)
            try:
                date = _dt.date.fromisoformat(row[d_idx].strip())
            except ValueError:
                raise ParseError(f"bad date {row[d_idx]!r} (want YYYY-MM-DD)",
                                 line=lineno) from None
            raw = row[p_idx].strip()
            if raw == "" or raw.lower() in ("nan", "null", "na"):
                dropped += 1
                continue
            try:
                price = float(raw)
            except ValueError:
                raise ParseError(f"bad price {raw!r}", line=lineno) from None
            if not math.isfinite(price) or price <= 0:
                dropped += 1
                continue
            rows.append((date, price))
    if not rows:
        raise EmptySeries(f"{path}: no usable rows (dropped {dropped})")
    rows.sort(key=lambda r: r[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise ParseError(f"duplicate date {a.isoformat()}")
    if dropped:
        logger.info("%s: dropped %d rows with missing or non-positive prices",
                    path, dropped)
    dates, prices = zip(*rows)
    return PriceSeries(dates=dates, prices=np.array(prices),
                       label=label or str(path), dropped_rows=dropped)


def align(stock: PriceSeries, index: PriceSeries) -> tuple[PriceSeries, PriceSeries]:
    """Inner join of two series on exact dates."""
    common = sorted(set(stock.dates) & set(index.dates))
    if not common:
        raise NoOverlap(
            f"series {stock.label!r} and {index.label!r} share no dates"
        )
    s_map = dict(zip(stock.dates, stock.prices))
    i_map = dict(zip(index.dates, index.prices))
    return (
        PriceSeries(dates=common, prices=[s_map[d] for d in common],
                    label=stock.label),
        PriceSeries(dates=common, prices=[i_map[d] for d in common],
                    label=index.label),
    )


def relative_price(stock: PriceSeries, index: PriceSeries) -> np.ndarray:
    """w(t) = p_stock(t) / p_index(t) for date-aligned series."""
    if stock.dates != index.dates:
        raise ValueError("series must be aligned on identical dates (use align())")
    return stock.prices / index.prices


def fisher_pry_transform(w) -> np.ndarray:
    """Elementwise natural log of a positive relative-price series."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise NonPositiveValue("relative prices must be strictly positive")
    return np.log(w)


def years_from_dates(dates) -> np.ndarray:
    """Time axis in years from the first date (365.25-day convention)."""
    d0 = dates[0]
    return np.array([(d - d0).days for d in dates], dtype=float) / DAYS_PER_YEAR


@dataclass(frozen=True)
class TrendSegment:
    """A half-open index range [start_index, end_index) with its line fit.

    The slope is the estimated fitness advantage over the segment, in 1/year
    when the time axis is in years.
    """

    start_index: int
    end_index: int
    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if not self.start_index < self.end_index:
            raise ValueError("need start_index < end_index")


class _SegmentCost:
    """O(1) per-range least-squares costs from prefix sums."""

    def __init__(self, t: np.ndarray, y: np.ndarray):
        def acc(a):
            return np.concatenate([[0.0], np.cumsum(a)])

        self.t, self.y = t, y
        self.St, self.Stt = acc(t), acc(t * t)
        self.Sy, self.Syy, self.Sty = acc(y), acc(y * y), acc(t * y)

    def fit(self, i: int, j: int) -> tuple[float, float, float]:
        """(sse, slope, intercept) of the OLS line on points [i, j)."""
        m = j - i
        st = self.St[j] - self.St[i]
        stt = self.Stt[j] - self.Stt[i]
        sy = self.Sy[j] - self.Sy[i]
        syy = self.Syy[j] - self.Syy[i]
        sty = self.Sty[j] - self.Sty[i]
        den = m * stt - st * st
        if den <= 0:
            return max(syy - sy * sy / m, 0.0), 0.0, sy / m
        slope = (m * sty - st * sy) / den
        intercept = (sy - slope * st) / m
        sse = (syy - 2 * intercept * sy - 2 * slope * sty
               + m * intercept**2 + 2 * intercept * slope * st + slope**2 * stt)
        return max(sse, 0.0), slope, intercept

    def sse_row(self, starts: np.ndarray, j: int) -> np.ndarray:
        """Vector of OLS costs for ranges [i, j) over all i in starts."""
        m = j - starts
        st = self.St[j] - self.St[starts]
        stt = self.Stt[j] - self.Stt[starts]
        sy = self.Sy[j] - self.Sy[starts]
        syy = self.Syy[j] - self.Syy[starts]
        sty = self.Sty[j] - self.Sty[starts]
        den = m * stt - st * st
        safe = den > 0
        slope = np.where(safe, (m * sty - st * sy) / np.where(safe, den, 1.0), 0.0)
        intercept = (sy - slope * st) / m
        sse = (syy - 2 * intercept * sy - 2 * slope * sty
               + m * intercept**2 + 2 * intercept * slope * st + slope**2 * stt)
        return np.maximum(sse, 0.0)

    def r_squared(self, i: int, j: int) -> float:
        sse, _, _ = self.fit(i, j)
        m = j - i
        sy = self.Sy[j] - self.Sy[i]
        syy = self.Syy[j] - self.Syy[i]
        sst = syy - sy * sy / m
        if sst <= 0:
            return 1.0
        return 1.0 - sse / sst


def _default_penalty(y: np.ndarray) -> float:
    """BIC-style per-breakpoint cost 2 * sigma^2 * ln(n).

    sigma^2 is estimated from first differences, which are trend-free for
    slowly varying signals.
    """
    n = y.size
    sigma2 = float(np.mean(np.diff(y) ** 2)) / 2.0
    if sigma2 == 0:
        sigma2 = 1e-12
    return 2.0 * sigma2 * math.log(n)


def optimal_partition(y, t, max_segments: int, penalty: float,
                      min_segment_length: int) -> tuple[list[int], float]:
    """Exact penalized least-squares partition by dynamic programming.

    Returns (boundaries, objective) where boundaries = [0, b1, ..., n] and
    objective = total OLS squared error + penalty * (number of breakpoints).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    cost = _SegmentCost(t, y)
    kmax = min(max_segments, n // min_segment_length)
    if kmax < 1:
        raise TooShort(
            f"series of length {n} cannot hold one segment of "
            f"{min_segment_length} points"
        )
    # best[k][j]: minimal SSE splitting the first j points into k segments
    inf = np.inf
    best = np.full((kmax + 1, n + 1), inf)
    back = np.zeros((kmax + 1, n + 1), dtype=int)
    best[0, 0] = 0.0
    for k in range(1, kmax + 1):
        j_lo, j_hi = k * min_segment_length, n
        for j in range(j_lo, j_hi + 1):
            starts = np.arange((k - 1) * min_segment_length,
                               j - min_segment_length + 1)
            if starts.size == 0:
                continue
            prev = best[k - 1, starts]
            usable = np.isfinite(prev)
            if not usable.any():
                continue
            totals = prev + cost.sse_row(starts, j)
            pick = int(np.argmin(totals))
            best[k, j] = totals[pick]
            back[k, j] = starts[pick]
    objectives = [best[k, n] + penalty * (k - 1) for k in range(1, kmax + 1)]
    k_star = int(np.argmin(objectives)) + 1
    bounds = [n]
    j = n
    for k in range(k_star, 0, -1):
        j = int(back[k, j])
        bounds.append(j)
    return bounds[::-1], float(objectives[k_star - 1])


def _refine_breakpoints(y: np.ndarray, t: np.ndarray, bounds: list[int],
                        min_segment_length: int, window: int = 120) -> list[int]:
    """Continuity-constrained local refit of each interior breakpoint.

    Within each pair of adjacent segments, the breakpoint is moved to the
    position minimizing the squared error of a continuous two-piece linear
    fit (basis 1, t, hinge).  Free-intercept segment costs barely constrain
    the join point when the underlying signal is continuous; the hinge fit
    pins it.
    """
    bounds = list(bounds)
    for idx in range(1, len(bounds) - 1):
        lo_seg, b0, hi_seg = bounds[idx - 1], bounds[idx], bounds[idx + 1]
        lo = max(lo_seg + min_segment_length, b0 - window)
        hi = min(hi_seg - min_segment_length, b0 + window)
        if lo >= hi:
            continue
        tt = t[lo_seg:hi_seg]
        yy = y[lo_seg:hi_seg]
        ones = np.ones_like(tt)
        best_sse, best_b = np.inf, b0
        for b in range(lo, hi + 1):
            hinge = np.maximum(tt - t[b], 0.0)
            X = np.stack([ones, tt, hinge], axis=1)
            beta, *_ = np.linalg.lstsq(X, yy, rcond=None)
            resid = yy - X @ beta
            sse = float(resid @ resid)
            if sse < best_sse:
                best_sse, best_b = sse, b
        bounds[idx] = best_b
    return bounds


def segment_trends(y, t, max_segments: int = 8, penalty: float | None = None,
                   min_segment_length: int = 60,
                   refine_breakpoints: bool = True) -> list[TrendSegment]:
    """Piecewise-linear trend segments of a Fisher-Pry series.

    y is ln(relative price), t the time axis in years.  The number and
    placement of segments minimize total squared error plus penalty per
    breakpoint (exact DP); breakpoints are then locally refined under a
    continuity constraint unless refine_breakpoints is False.  Returns
    ordered, non-overlapping segments covering the series.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if y.shape != t.shape or y.ndim != 1:
        raise ValueError("y and t must be equal-length 1-d arrays")
    if min_segment_length < 2:
        raise ValueError("min_segment_length must be >= 2")
    if y.size < 2 * min_segment_length:
        raise TooShort(
            f"need at least {2 * min_segment_length} observations, got {y.size}"
        )
    if penalty is None:
        penalty = _default_penalty(y)
    if penalty <= 0:
        raise InvalidPenalty(f"penalty must be positive, got {penalty}")
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")

    bounds, _ = optimal_partition(y, t, max_segments, penalty, min_segment_length)
    if refine_breakpoints and len(bounds) > 2:
        bounds = _refine_breakpoints(y, t, bounds, min_segment_length)
    cost = _SegmentCost(t, y)
    segments = []
    for i, j in zip(bounds[:-1], bounds[1:]):
        _, slope, intercept = cost.fit(i, j)
        segments.append(TrendSegment(
            start_index=i, end_index=j, slope=float(slope),
            intercept=float(intercept), r_squared=float(cost.r_squared(i, j)),
        ))
    return segments


def trend_report(segments: list[TrendSegment], dates=None, label: str = "",
                 neutral_threshold: float = 0.01) -> dict:
    """JSON-ready report classifying each segment's competitive position.

    Slopes above the threshold read as an advantage, below its negative as a
    disadvantage, anything in between as neutral.
    """
    entries = []
    for seg in segments:
        if seg.slope > neutral_threshold:
            classification = "advantage"
        elif seg.slope < -neutral_threshold:
            classification = "disadvantage"
        else:
            classification = "neutral"
        entry = {
            "start_index": seg.start_index,
            "end_index": seg.end_index,
            "fitness_advantage_per_year": seg.slope,
            "intercept": seg.intercept,
            "r_squared": seg.r_squared,
            "classification": classification,
        }
        if dates is not None:
            entry["start_date"] = dates[seg.start_index].isoformat()
            entry["end_date"] = dates[seg.end_index - 1].isoformat()
        entries.append(entry)
    return {
        "label": label,
        "neutral_threshold_per_year": neutral_threshold,
        "n_segments": len(entries),
        "segments": entries,
    }


def format_trend_report(report: dict) -> str:
    """Human-readable rendering of a trend report."""
    lines = [f"Trend report: {report['label'] or '(unnamed)'}"]
    for k, seg in enumerate(report["segments"], start=1):
        span = f"[{seg['start_index']}, {seg['end_index']})"
        if "start_date" in seg:
            span = f"{seg['start_date']} .. {seg['end_date']}"
        lines.append(
            f"  segment {k}: {span}  "
            f"df={seg['fitness_advantage_per_year']:+.4f}/yr  "
            f"R2={seg['r_squared']:.3f}  {seg['classification']}"
        )
    return "\n".join(lines)
