"""CSV ingestion, price-to-return transformation and summary statistics.

Input files are headered CSV.  The date column is taken from an explicit
name, else a column literally called "date" (case-insensitive), else the
series is treated as undated; the value column is taken from an explicit
name, else the single remaining column.  Dates parse as ISO-8601 unless a
strptime format is supplied, and must increase strictly.

All error messages cite physical file rows, counting the header as row 1.
Rows with missing or unparseable values are rejected outright; silently
interpolating gaps would distort the tails this package exists to model.

Price mode converts levels to percentage log returns, 100 (log P_t -
log P_{t-1}), dropping the first row; prices must be finite and positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np
from scipy.stats import chi2


class DataError(ValueError):
    """Malformed input file or impossible split."""


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """A return series with optional ISO-date labels."""

    values: np.ndarray
    dates: tuple[str, ...] | None = None
    source: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        object.__setattr__(self, "values", values)
        if self.dates is not None and len(self.dates) != values.size:
            raise ValueError("dates and values must have equal length")

    def __len__(self) -> int:
        return int(self.values.size)

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        dates = None if self.dates is None else self.dates[start:stop]
        return ReturnSeries(self.values[start:stop], dates, self.source)


def _parse_date(text: str, fmt: str | None, row: int):
    try:
        if fmt is None:
            return date.fromisoformat(text.strip())
        return datetime.strptime(text.strip(), fmt).date()
    except ValueError as exc:
        raise DataError(f"row {row}: could not parse date {text!r}") from exc


def _pick_columns(
    header: list[str], date_column: str | None, value_column: str | None
) -> tuple[int | None, int]:
    names = [h.strip() for h in header]
    if date_column is not None:
        if date_column not in names:
            raise DataError(f"row 1: no column named {date_column!r} in header")
        date_idx = names.index(date_column)
    else:
        lowered = [n.lower() for n in names]
        date_idx = lowered.index("date") if "date" in lowered else None
    if value_column is not None:
        if value_column not in names:
            raise DataError(f"row 1: no column named {value_column!r} in header")
        value_idx = names.index(value_column)
        if value_idx == date_idx:
            raise DataError("date and value columns must differ")
        return date_idx, value_idx
    remaining = [i for i in range(len(names)) if i != date_idx]
    if len(remaining) != 1:
        raise DataError(
            "row 1: cannot infer the value column from header "
            f"{names}; pass an explicit value column"
        )
    return date_idx, remaining[0]


def load_returns(
    path,
    mode: str = "return",
    date_column: str | None = None,
    value_column: str | None = None,
    date_format: str | None = None,
) -> ReturnSeries:
    """Read a headered CSV into a ReturnSeries.

    ``mode`` is "return" (values pass through) or "price" (values are
    positive levels, converted to percentage log returns with the first
    row dropped).
    """
    if mode not in ("return", "price"):
        raise ValueError("mode must be 'return' or 'price'")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError("empty file")
    date_idx, value_idx = _pick_columns(rows[0], date_column, value_column)
    n_cols = len(rows[0])
    dates: list[str] = []
    values: list[float] = []
    previous = None
    for row_no, row in enumerate(rows[1:], start=2):
        if len(row) != n_cols:
            raise DataError(
                f"row {row_no}: expected {n_cols} fields, found {len(row)}"
            )
        raw = row[value_idx].strip()
        try:
            value = float(raw)
        except ValueError as exc:
            raise DataError(f"row {row_no}: could not parse value {raw!r}") from exc
        if not math.isfinite(value):
            raise DataError(f"row {row_no}: non-finite value {raw!r}")
        if mode == "price" and value <= 0.0:
            raise DataError(f"row {row_no}: non-positive price {raw!r}")
        if date_idx is not None:
            parsed = _parse_date(row[date_idx], date_format, row_no)
            if previous is not None and parsed <= previous:
                raise DataError(
                    f"row {row_no}: dates must increase strictly "
                    f"({parsed.isoformat()} after {previous.isoformat()})"
                )
            previous = parsed
            dates.append(parsed.isoformat())
        values.append(value)
    if not values:
        raise DataError("no data rows after the header")
    arr = np.array(values)
    labels = tuple(dates) if date_idx is not None else None
    if mode == "price":
        if arr.size < 2:
            raise DataError("price mode needs at least 2 rows")
        arr = 100.0 * np.diff(np.log(arr))
        labels = labels[1:] if labels is not None else None
    return ReturnSeries(arr, labels, source=str(path))


def split_series(
    series: ReturnSeries, split: int | str
) -> tuple[ReturnSeries, ReturnSeries]:
    """Split into in-sample and out-of-sample parts.

    An integer (or digit string) gives the in-sample length; otherwise the
    split is a date and the out-of-sample part starts at the first
    observation dated on or after it.
    """
    if isinstance(split, str) and split.lstrip("+-").isdigit():
        split = int(split)
    if isinstance(split, int):
        point = split
    else:
        if series.dates is None:
            raise DataError("date split requires a dated series")
        cut = _parse_date(str(split), None, 0).isoformat()
        point = next(
            (i for i, d in enumerate(series.dates) if d >= cut), len(series)
        )
    if not 0 < point < len(series):
        raise DataError(
            f"split at {split!r} leaves no data on one side "
            f"(series length {len(series)})"
        )
    return series.slice(0, point), series.slice(point, len(series))


def summary_stats(y) -> dict:
    """Moment summary of a return series (raw-kurtosis convention).

    Returns n, mean, median, sample std, min/max, quartiles, moment
    skewness and kurtosis, and the Jarque-Bera p-value.  A zero-variance
    series is flagged degenerate with skewness and kurtosis reported as 0
    and p = 1.
    """
    values = np.asarray(getattr(y, "values", y), dtype=float)
    n = values.size
    if n < 8:
        raise ValueError("summary statistics need at least 8 observations")
    mean = float(values.mean())
    centred = values - mean
    m2 = float(np.mean(centred**2))
    degenerate = m2 == 0.0
    if degenerate:
        skewness = kurtosis = 0.0
        jb_p = 1.0
    else:
        skewness = float(np.mean(centred**3)) / m2**1.5
        kurtosis = float(np.mean(centred**4)) / m2**2
        jb = n / 6.0 * (skewness**2 + 0.25 * (kurtosis - 3.0) ** 2)
        jb_p = float(chi2.sf(jb, 2))
    return {
        "n": int(n),
        "mean": mean,
        "median": float(np.median(values)),
        "std": float(values.std(ddof=1)),
        "min": float(values.min()),
        "max": float(values.max()),
        "q1": float(np.quantile(values, 0.25)),
        "q3": float(np.quantile(values, 0.75)),
        "skewness": skewness,
        "kurtosis": kurtosis,
        "jarque_bera_p": jb_p,
        "degenerate": degenerate,
    }
