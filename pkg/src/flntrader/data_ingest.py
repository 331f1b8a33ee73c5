"""Kline CSV ingestion and the relative-change price filter.

Raw 1-minute candles are reduced to the price/volume stream the trader
actually sees: a price is recorded only when it moves more than a relative
threshold away from the last recorded price.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_PRICE_COLUMN = 2
DEFAULT_VOLUME_COLUMN = 6
DEFAULT_VOLUME_SCALE = 1e-7
DEFAULT_FILTER_THRESHOLD = 0.01


class KlineParseError(ValueError):
    """A row of the kline CSV could not be parsed."""


class EmptyInputError(ValueError):
    """The kline CSV contained no data rows."""


class InsufficientDataError(ValueError):
    """Too few raw rows to run the price filter."""


@dataclass(frozen=True)
class RawKlineRow:
    """One 1-minute kline: interval-open timestamp (ms), open price, volume."""

    open_time: int
    open_price: float
    volume: float


@dataclass(frozen=True)
class FilteredSeries:
    """Price/volume stream surviving the relative-change filter.

    volumes[k] holds the raw volume of the interval immediately preceding
    the one whose price was retained; volumes[0] is the first raw volume.
    """

    prices: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=np.float64)
        volumes = np.array(self.volumes, dtype=np.float64)
        if prices.ndim != 1 or volumes.ndim != 1:
            raise ValueError("prices and volumes must be one-dimensional")
        if len(prices) != len(volumes):
            raise ValueError(
                f"prices ({len(prices)}) and volumes ({len(volumes)}) differ in length"
            )
        prices.flags.writeable = False
        volumes.flags.writeable = False
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "volumes", volumes)

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def n_blocks(self) -> int:
        """Number of complete 5-point blocks available to the trader."""
        return len(self.prices) // 5


@dataclass(frozen=True)
class DatasetSlice:
    """Half-open index range [start_index, end_index) of a filtered series."""

    start_index: int
    end_index: int
    label: str = ""


def parse_klines(
    path,
    price_column: int = DEFAULT_PRICE_COLUMN,
    volume_column: int = DEFAULT_VOLUME_COLUMN,
    volume_scale: float = DEFAULT_VOLUME_SCALE,
) -> list[RawKlineRow]:
    """Read kline rows from a CSV file.

    Columns are 1-based. The timestamp is always read from column 1; volume
    values are multiplied by ``volume_scale``. A leading non-numeric header
    row is skipped with a warning. Any other malformed row raises
    :class:`KlineParseError` naming the offending line.
    """
    if price_column < 1 or volume_column < 1:
        raise ValueError("column indices are 1-based and must be >= 1")
    if volume_scale <= 0:
        raise ValueError(f"volume_scale must be positive, got {volume_scale}")

    rows: list[RawKlineRow] = []
    width = max(price_column, volume_column, 1)
    with open(path, newline="") as fh:
        for line_no, record in enumerate(csv.reader(fh), start=1):
            if not record:
                continue
            try:
                row = _parse_record(record, line_no, width, price_column, volume_column)
            except KlineParseError:
                if line_no == 1 and not rows:
                    logger.warning("skipping non-numeric header row in %s", path)
                    continue
                raise
            if rows and row.open_time <= rows[-1].open_time:
                raise KlineParseError(
                    f"line {line_no}: open_time {row.open_time} is not strictly increasing"
                )
            rows.append(
                RawKlineRow(row.open_time, row.open_price, row.volume * volume_scale)
            )
    if not rows:
        raise EmptyInputError(f"no data rows in {path}")
    return rows


def _parse_record(record, line_no, width, price_column, volume_column) -> RawKlineRow:
    if len(record) < width:
        raise KlineParseError(
            f"line {line_no}: expected at least {width} columns, got {len(record)}"
        )
    try:
        open_time = int(float(record[0]))
        price = float(record[price_column - 1])
        volume = float(record[volume_column - 1])
    except ValueError:
        raise KlineParseError(f"line {line_no}: non-numeric field in {record!r}") from None
    if price <= 0:
        raise KlineParseError(f"line {line_no}: non-positive price {price}")
    if volume < 0:
        raise KlineParseError(f"line {line_no}: negative volume {volume}")
    return RawKlineRow(open_time, price, volume)


def filter_series(
    raw: list[RawKlineRow], threshold: float = DEFAULT_FILTER_THRESHOLD
) -> FilteredSeries:
    """Apply the relative-change filter to raw kline rows.

    The stream opens at the *second* raw price paired with the *first* raw
    volume. From the third raw row on, a price is retained when its relative
    distance from the last retained price exceeds ``threshold``; the paired
    volume is the raw volume of the preceding interval.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if len(raw) < 2:
        raise InsufficientDataError(
            f"need at least 2 raw rows to start the filter, got {len(raw)}"
        )
    prices = [raw[1].open_price]
    volumes = [raw[0].volume]
    ref = raw[1].open_price
    for i in range(2, len(raw)):
        price = raw[i].open_price
        if abs(price - ref) / ref > threshold:
            prices.append(price)
            volumes.append(raw[i - 1].volume)
            ref = price
    return FilteredSeries(np.asarray(prices), np.asarray(volumes))


def slice_series(series: FilteredSeries, dataset_slice: DatasetSlice) -> FilteredSeries:
    """Extract a contiguous sub-series, re-based to index 0."""
    start, end = dataset_slice.start_index, dataset_slice.end_index
    if not (0 <= start < end <= len(series)):
        raise IndexError(
            f"slice [{start}, {end}) out of range for series of length {len(series)}"
        )
    return FilteredSeries(series.prices[start:end], series.volumes[start:end])
