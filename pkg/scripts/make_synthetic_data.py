#!/usr/bin/env python3
"""Regenerate data/synthetic_klines.csv.

A zero-drift multiplicative walk: every minute the open price moves exactly
+2% or -2% with equal probability, so the 1% filter retains every point and
the filtered series has exactly ROWS - 1 points. Volumes are lognormal in
raw exchange units (about 1e7, so the default 1e-7 scale maps them near 1).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

ROWS = 5001  # -> 5000 filtered points = 1000 blocks
SEED = 20240817
START_TIME_MS = 1546300800000  # 2019-01-01T00:00:00Z
STEP_MS = 60000
START_PRICE = 0.25


def main() -> None:
    rng = np.random.default_rng(SEED)
    moves = rng.choice([1.02, 0.98], size=ROWS - 1)
    prices = START_PRICE * np.concatenate([[1.0], np.cumprod(moves)])
    volumes = rng.lognormal(mean=np.log(1.5e7), sigma=0.5, size=ROWS)

    out = Path(__file__).resolve().parent.parent / "data" / "synthetic_klines.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        for k in range(ROWS):
            open_price = prices[k]
            close_price = prices[k + 1] if k + 1 < ROWS else prices[k]
            writer.writerow(
                [
                    START_TIME_MS + k * STEP_MS,
                    f"{open_price:.8f}",
                    f"{open_price * 1.001:.8f}",
                    f"{open_price * 0.999:.8f}",
                    f"{close_price:.8f}",
                    f"{volumes[k]:.2f}",
                ]
            )
    print(f"wrote {ROWS} rows to {out}")


if __name__ == "__main__":
    main()
