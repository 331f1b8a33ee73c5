"""Shared fixtures and synthetic-data helpers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from flntrader import FilteredSeries

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_FILE = REPO_ROOT / "data" / "synthetic_klines.csv"


@pytest.fixture(scope="session")
def bundled_data_path() -> Path:
    assert DATA_FILE.is_file(), f"bundled dataset missing: {DATA_FILE}"
    return DATA_FILE


@pytest.fixture(scope="session")
def bundled_series(bundled_data_path):
    from flntrader import filter_series, parse_klines

    return filter_series(parse_klines(bundled_data_path))


def make_walk_series(
    n_points: int, seed: int, step: float = 0.02, start: float = 1.0
) -> FilteredSeries:
    """Zero-drift multiplicative walk as an already-filtered series.

    Exact +/-step moves keep every consecutive pair above the 1% filter
    threshold and make E[p_next | p] = p, so wealth is a martingale for any
    zero-fee trading strategy.
    """
    rng = np.random.default_rng(seed)
    moves = rng.choice([1.0 + step, 1.0 - step], size=n_points - 1)
    prices = start * np.concatenate([[1.0], np.cumprod(moves)])
    volumes = rng.lognormal(mean=0.0, sigma=0.4, size=n_points)
    return FilteredSeries(prices, volumes)


def constant_series(n_points: int, price: float = 1.0, volume: float = 2.0) -> FilteredSeries:
    return FilteredSeries(np.full(n_points, price), np.full(n_points, volume))
