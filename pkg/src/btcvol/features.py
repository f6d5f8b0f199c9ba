"""Price and tweet feature engineering on the 15-minute grid.

One day is exactly 96 fifteen-minute bins anchored at UTC midnight. The
price side produces log-returns and daily realized volatility; the tweet
side aggregates records into per-bin means plus a raw count, from which
the named feature subsets are column-stacked in a fixed order.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)

DAY_BINS = 96
BIN_MINUTES = 15
BIN_DELTA = dt.timedelta(minutes=BIN_MINUTES)

# column order inside each named feature set
TWEET_COLUMNS = ("gif_count", "photo_count", "video_count",
                 "is_quote_status", "possibly_sensitive")
USER_COLUMNS = ("favourites_count", "followers_count", "friends_count",
                "listed_count", "verified", "default_profile", "default_profile_image")
FEATURE_SET_WIDTHS = {"Count": 1, "VADER": 1, "Tweet": len(TWEET_COLUMNS),
                      "User": len(USER_COLUMNS)}
FEATURE_SET_ORDER = ("Count", "VADER", "Tweet", "User")


@dataclass(frozen=True)
class PriceSeries:
    """Closing prices on a strict 15-minute UTC grid.

    ``filled_mask`` marks candles synthesized by forward-filling gaps;
    day assembly drops days with more than ``max_gap_bins`` such bins.
    """

    timestamps: tuple
    closes: np.ndarray
    filled_mask: np.ndarray | None = None
    max_gap_bins: int = 4

    def __post_init__(self):
        if len(self.timestamps) != len(self.closes):
            raise ValueError("timestamps and closes differ in length")
        if np.any(np.asarray(self.closes) <= 0):
            raise ValueError("prices must be strictly positive")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b - a != BIN_DELTA:
                raise ValueError(f"timestamps must step by {BIN_MINUTES} minutes: {a} -> {b}")


def parse_timestamp(text: str) -> dt.datetime:
    """Parse an ISO-8601 timestamp, normalizing to UTC."""
    ts = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def format_timestamp(ts: dt.datetime) -> str:
    return ts.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_candles(path, max_gap_bins: int = 4) -> PriceSeries:
    """Read a (timestamp, close) CSV, forward-filling gaps of a few bins.

    Missing candles are forward-filled (which yields zero log-returns);
    the per-day cap on filled bins is enforced later when days are
    assembled, so the fill count per day is tracked via ``filled_mask``.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["timestamp", "close"]:
            raise ValueError(f"candle file must start with timestamp,close header, got {header}")
        for row in reader:
            if not row:
                continue
            rows.append((parse_timestamp(row[0]), float(row[1])))
    if len(rows) < 2:
        raise ValueError("need at least two candles")
    rows.sort(key=lambda r: r[0])

    timestamps = [rows[0][0]]
    closes = [rows[0][1]]
    filled = [False]
    for ts, close in rows[1:]:
        expected = timestamps[-1] + BIN_DELTA
        while expected < ts:
            timestamps.append(expected)
            closes.append(closes[-1])
            filled.append(True)
            expected += BIN_DELTA
        if ts != expected:
            raise ValueError(f"candle timestamp {ts} is off the 15-minute grid")
        timestamps.append(ts)
        closes.append(close)
        filled.append(False)
    return PriceSeries(tuple(timestamps), np.asarray(closes, dtype=np.float64),
                       np.asarray(filled), max_gap_bins)


def log_returns(prices) -> np.ndarray:
    """r_t = log P_t - log P_{t-1}; output is one shorter than the input."""
    closes = prices.closes if isinstance(prices, PriceSeries) else np.asarray(prices, dtype=np.float64)
    if closes.size < 2:
        raise ValueError("need at least two prices")
    if np.any(closes <= 0):
        raise ValueError("prices must be strictly positive")
    logs = np.log(closes)
    return logs[1:] - logs[:-1]


def realized_volatility(returns_in_day) -> float:
    """Square root of the summed squared log-returns of one day."""
    r = np.asarray(returns_in_day, dtype=np.float64)
    if r.shape != (DAY_BINS,):
        raise ValueError(f"expected exactly {DAY_BINS} returns, got shape {r.shape}")
    return float(np.sqrt(np.sum(r * r)))


def day_grid(day: dt.date) -> list[dt.datetime]:
    start = dt.datetime.combine(day, dt.time(0, 0), tzinfo=dt.timezone.utc)
    return [start + i * BIN_DELTA for i in range(DAY_BINS)]


@dataclass
class DayTable:
    """Returns reshaped into full UTC days, with invalid days flagged."""

    dates: list[dt.date]
    returns: np.ndarray      # (n_days, 96)
    valid: np.ndarray        # (n_days,) bool


def days_from_candles(series: PriceSeries) -> DayTable:
    """Group log-returns into full days; the return at time t belongs to
    the day containing t (the later candle of the pair).

    Partial leading/trailing days are discarded with a warning; days
    whose forward-filled bin count exceeds the gap cap are flagged
    invalid and excluded from window construction.
    """
    returns = log_returns(series)
    stamps = series.timestamps[1:]
    mask = series.filled_mask if series.filled_mask is not None \
        else np.zeros(len(series.closes), dtype=bool)
    filled = mask[1:]
    max_gap = series.max_gap_bins

    by_day: dict[dt.date, list[int]] = {}
    for idx, ts in enumerate(stamps):
        by_day.setdefault(ts.date(), []).append(idx)

    dates, rows, valid = [], [], []
    for day in sorted(by_day):
        idxs = by_day[day]
        if len(idxs) != DAY_BINS:
            warnings.warn(f"discarding partial day {day} with {len(idxs)} bins")
            continue
        fill_count = int(filled[idxs].sum())
        ok = fill_count <= max_gap
        if not ok:
            warnings.warn(f"dropping day {day}: {fill_count} forward-filled bins exceeds cap {max_gap}")
        dates.append(day)
        rows.append(returns[idxs])
        valid.append(ok)
    if not dates:
        raise ValueError("no full days in the candle series")
    return DayTable(dates, np.asarray(rows), np.asarray(valid))


# ---------------------------------------------------------------------------
# tweet binning

@dataclass(frozen=True)
class FeatureBin:
    """Per-interval tweet aggregates: raw count plus field means.

    Empty intervals keep count 0 and all means 0 by convention.
    """

    start: dt.datetime
    count: int
    gif_count: float = 0.0
    photo_count: float = 0.0
    video_count: float = 0.0
    is_quote_status: float = 0.0
    possibly_sensitive: float = 0.0
    favourites_count: float = 0.0
    followers_count: float = 0.0
    friends_count: float = 0.0
    listed_count: float = 0.0
    verified: float = 0.0
    default_profile: float = 0.0
    default_profile_image: float = 0.0
    vader_compound: float = 0.0


MEAN_FIELDS = TWEET_COLUMNS + USER_COLUMNS + ("vader_compound",)


def bin_tweets(records, grid_start: dt.datetime, n_bins: int,
               compounds=None) -> list[FeatureBin]:
    """Aggregate a created_at-sorted record stream onto half-open
    [start, start+15min) intervals.

    ``compounds`` supplies one sentiment score per record; booleans
    average as 0/1 fractions.
    """
    if grid_start.tzinfo is None:
        grid_start = grid_start.replace(tzinfo=dt.timezone.utc)
    sums = np.zeros((n_bins, len(MEAN_FIELDS)))
    counts = np.zeros(n_bins, dtype=np.int64)
    span = n_bins * BIN_DELTA
    for i, rec in enumerate(records):
        offset = rec.created_at - grid_start
        if offset < dt.timedelta(0) or offset >= span:
            continue
        b = int(offset // BIN_DELTA)
        counts[b] += 1
        row = [rec.gif_count, rec.photo_count, rec.video_count,
               float(rec.is_quote_status), float(rec.possibly_sensitive),
               rec.favourites_count, rec.followers_count, rec.friends_count,
               rec.listed_count, float(rec.verified), float(rec.default_profile),
               float(rec.default_profile_image),
               compounds[i] if compounds is not None else 0.0]
        sums[b] += row

    bins = []
    for b in range(n_bins):
        start = grid_start + b * BIN_DELTA
        if counts[b] == 0:
            bins.append(FeatureBin(start=start, count=0))
        else:
            means = sums[b] / counts[b]
            bins.append(FeatureBin(start=start, count=int(counts[b]),
                                   **dict(zip(MEAN_FIELDS, means))))
    return bins


@dataclass(frozen=True)
class FeatureSetSelector:
    """Subset of the named feature sets {Count, VADER, Tweet, User}."""

    sets: frozenset

    def __post_init__(self):
        unknown = self.sets - set(FEATURE_SET_ORDER)
        if unknown:
            raise ValueError(f"unknown feature sets {sorted(unknown)}")
        if not self.sets:
            raise ValueError("feature selector must not be empty")

    @classmethod
    def parse(cls, text: str) -> "FeatureSetSelector":
        names = [t.strip().capitalize() for t in text.split(",") if t.strip()]
        fixed = [("VADER" if n.lower() == "vader" else n) for n in names]
        return cls(frozenset(fixed))

    @property
    def width(self) -> int:
        return sum(FEATURE_SET_WIDTHS[s] for s in self.sets)

    def label(self) -> str:
        return ", ".join(s for s in FEATURE_SET_ORDER if s in self.sets)

    def columns(self) -> list[str]:
        cols = []
        if "Count" in self.sets:
            cols.append("count")
        if "VADER" in self.sets:
            cols.append("vader_compound")
        if "Tweet" in self.sets:
            cols.extend(TWEET_COLUMNS)
        if "User" in self.sets:
            cols.extend(USER_COLUMNS)
        return cols


ALL_FEATURE_COLUMNS = FeatureSetSelector(frozenset(FEATURE_SET_ORDER)).columns()


def select_features(bins: list[FeatureBin], selector: FeatureSetSelector) -> np.ndarray:
    """Column-stack the selected sets in the fixed Count, VADER, Tweet, User order."""
    cols = selector.columns()
    out = np.empty((len(bins), len(cols)))
    for i, fb in enumerate(bins):
        out[i] = [getattr(fb, c) for c in cols]
    return out


# ---------------------------------------------------------------------------
# scaling

@dataclass(frozen=True)
class Scaler:
    """Per-column min/range transform mapping training data into [-0.25, 0.25]."""

    mins: np.ndarray
    ranges: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        m = np.asarray(matrix, dtype=np.float64)
        return (m - self.mins) / self.ranges * 0.5 - 0.25

    def invert(self, matrix: np.ndarray) -> np.ndarray:
        m = np.asarray(matrix, dtype=np.float64)
        return (m + 0.25) * 2.0 * self.ranges + self.mins


def fit_scaler(train_matrix: np.ndarray) -> Scaler:
    """Learn per-column min and range; a zero-range column scales by 1
    (every value then maps to -0.25) and triggers a warning.
    """
    m = np.asarray(train_matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    mins = m.min(axis=0)
    ranges = m.max(axis=0) - mins
    degenerate = ranges == 0
    if np.any(degenerate):
        warnings.warn(f"{int(degenerate.sum())} constant column(s); scaling by 1")
        ranges = np.where(degenerate, 1.0, ranges)
    return Scaler(mins, ranges)


def apply_scaler(matrix: np.ndarray, scaler: Scaler) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    squeeze = m.ndim == 1
    if squeeze:
        m = m[:, None]
    out = scaler.transform(m)
    return out[:, 0] if squeeze else out


def invert_scaler(matrix: np.ndarray, scaler: Scaler) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    squeeze = m.ndim == 1
    if squeeze:
        m = m[:, None]
    out = scaler.invert(m)
    return out[:, 0] if squeeze else out


# ---------------------------------------------------------------------------
# day windows

@dataclass(frozen=True)
class DayWindow:
    """One training/evaluation pair: a day's inputs and the next day's targets.

    ``target_raw`` keeps the unscaled log-returns so true realized
    volatility survives scaling of the loss-space arrays.
    """

    input_date: dt.date
    date: dt.date
    inputs: np.ndarray            # (96,) log-returns of the input day
    target: np.ndarray            # (96,) log-returns of the target day
    target_raw: np.ndarray        # (96,) unscaled target log-returns
    features: np.ndarray | None = None   # (96, F) tweet features of the input day

    def __post_init__(self):
        if self.date <= self.input_date:
            raise ValueError("target day must follow the input day")


def make_day_windows(table: DayTable, features_by_day: np.ndarray | None = None) -> list[DayWindow]:
    """Pair each valid day with the next valid calendar day as its target.

    Windows never overlap in time: the input day strictly precedes the
    target day, which is what the no-leakage property asserts.
    """
    windows = []
    for i in range(len(table.dates) - 1):
        if not (table.valid[i] and table.valid[i + 1]):
            continue
        if table.dates[i + 1] - table.dates[i] != dt.timedelta(days=1):
            continue
        feats = features_by_day[i] if features_by_day is not None else None
        windows.append(DayWindow(
            input_date=table.dates[i],
            date=table.dates[i + 1],
            inputs=table.returns[i].copy(),
            target=table.returns[i + 1].copy(),
            target_raw=table.returns[i + 1].copy(),
            features=feats.copy() if feats is not None else None,
        ))
    return windows


def scale_windows(windows: list[DayWindow], return_scaler: Scaler,
                  feature_scaler: Scaler | None = None) -> list[DayWindow]:
    """Produce scaled copies for training; target_raw stays untouched."""
    scaled = []
    for w in windows:
        feats = None
        if w.features is not None:
            if feature_scaler is None:
                raise ValueError("feature windows require a feature scaler")
            feats = apply_scaler(w.features, feature_scaler)
        scaled.append(replace(
            w,
            inputs=apply_scaler(w.inputs, return_scaler),
            target=apply_scaler(w.target, return_scaler),
            features=feats,
        ))
    return scaled
