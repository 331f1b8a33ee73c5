"""Market-state features for one 5-price block.

Covers the RSI over a 15-price sliding window, block volume averages over a
20-entry ring (100 raw volumes), the 4-level cascade of relative price
movements, and assembly of the 27-component feature vector rescaled to a
fixed norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_ingest import FilteredSeries

BLOCK_SIZE = 5
RSI_WINDOW = 15
RSI_DIFFS = RSI_WINDOW - 1
VOLUME_RING = 20
N_FEATURES = 27

DEFAULT_DENOM_FLOOR = 1e-9
DEFAULT_FEATURE_NORM = 6.0


class DegenerateVolumeError(ValueError):
    """A volume average is zero, so the ratio features are undefined."""


@dataclass(frozen=True)
class MarketBlock:
    """Five consecutive filtered prices and their preceding-interval volumes."""

    prices: np.ndarray
    volumes: np.ndarray
    index: int  # 1-based block counter; block i covers filtered points [5(i-1), 5i)


def market_block(series: FilteredSeries, index: int) -> MarketBlock:
    """Return block ``index`` (1-based) of a filtered series."""
    lo = BLOCK_SIZE * (index - 1)
    hi = BLOCK_SIZE * index
    if index < 1 or hi > len(series):
        raise IndexError(f"block {index} out of range for series of length {len(series)}")
    return MarketBlock(series.prices[lo:hi], series.volumes[lo:hi], index)


def nmd_cascade(prices, denom_floor: float = DEFAULT_DENOM_FLOOR):
    """Iterated relative differences of a 5-price block.

    Level 1 divides by the (positive) price itself; levels 2 to 4 divide by
    the absolute value of the previous level, floored at ``denom_floor`` so
    repeated equal movements cannot produce a zero denominator.
    """
    pr = np.asarray(prices, dtype=np.float64)
    nmd1 = np.diff(pr) / pr[:-1]
    nmd2 = np.diff(nmd1) / np.maximum(np.abs(nmd1[:-1]), denom_floor)
    nmd3 = np.diff(nmd2) / np.maximum(np.abs(nmd2[:-1]), denom_floor)
    nmd4 = np.diff(nmd3) / np.maximum(np.abs(nmd3[:-1]), denom_floor)
    return nmd1, nmd2, nmd3, nmd4


class RsiState:
    """RSI over a 15-price window that slides by one block per update.

    The window starts as zeros, so the first two updates mix synthetic zero
    prices into the indicator.
    """

    __slots__ = ("window", "up", "down")

    def __init__(self):
        self.window = np.zeros(RSI_WINDOW)
        self.up = np.zeros(RSI_DIFFS)
        self.down = np.zeros(RSI_DIFFS)

    def update(self, prices) -> float:
        """Slide the window over a new 5-price block and return the RSI."""
        w = self.window
        w[: RSI_WINDOW - BLOCK_SIZE] = w[BLOCK_SIZE:]
        w[RSI_WINDOW - BLOCK_SIZE :] = prices
        diffs = np.diff(w)
        np.maximum(diffs, 0.0, out=self.up)
        np.minimum(diffs, 0.0, out=self.down)
        np.negative(self.down, out=self.down)
        mean_down = float(self.down.mean())
        if mean_down == 0.0:
            return 100.0
        return 100.0 - 100.0 / (1.0 + float(self.up.mean()) / mean_down)


class VolumeState:
    """Ring of the 20 most recent block-mean volumes (100 raw volumes)."""

    __slots__ = ("ring",)

    def __init__(self):
        self.ring = np.zeros(VOLUME_RING)

    def update(self, volumes) -> tuple[float, float]:
        """Push the block's mean volume and return (cav, av).

        cav is the current block's mean volume; av is the mean of the ring,
        which starts at zero and warms up over the first 20 blocks.
        """
        cav = float(np.mean(volumes))
        ring = self.ring
        ring[:-1] = ring[1:]
        ring[-1] = cav
        return cav, float(ring.mean())


def assemble_features(
    prices,
    vol5: float,
    ipr: float,
    mon: float,
    cns: float,
    cav: float,
    av: float,
    rsi: float,
    nmd,
    mlim: float,
    target_norm: float = DEFAULT_FEATURE_NORM,
) -> np.ndarray:
    """Build the 27-component state vector and rescale it to ``target_norm``.

    The bias slot is held at zero during the rescale and overwritten with 1
    afterwards, so the norm constraint applies to the 26 market components
    only.
    """
    if cav == 0.0 or av == 0.0:
        raise DegenerateVolumeError(
            f"volume averages cav={cav}, av={av}; ratio features undefined"
        )
    nmd1, nmd2, nmd3, nmd4 = nmd
    feat = np.empty(N_FEATURES)
    feat[0] = 0.0
    feat[1:6] = prices
    feat[6] = ipr
    feat[7] = (feat[5] - ipr) / ipr
    feat[8] = mon
    feat[9] = cns
    feat[10] = cav
    feat[11] = av
    feat[12] = (cav - av) / av
    feat[13] = (vol5 - av) / av
    feat[14] = (vol5 - cav) / cav
    feat[15] = rsi
    feat[16:20] = nmd1
    feat[20:23] = nmd2
    feat[23:25] = nmd3
    feat[25:26] = nmd4
    feat[26] = mlim
    feat *= target_norm / float(np.linalg.norm(feat))
    feat[0] = 1.0
    return feat
