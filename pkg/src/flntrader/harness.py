"""Monte Carlo experiment runner.

Executes N seeded runs (learning agent or random baseline) over a dataset
slice and aggregates run-level statistics. Each run owns an RNG stream
derived from (master_seed, run_index), so results are identical for any
degree of parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterable

import numpy as np

from .agent import AgentParams, AgentRun, StepRecord, random_run
from .data_ingest import (
    DatasetSlice,
    FilteredSeries,
    filter_series,
    parse_klines,
    slice_series,
)

MODES = ("agent", "random")

# RSI needs a full 15-price window, i.e. 3 blocks; the baseline only needs
# one tradable block plus its successor.
MIN_POINTS_AGENT = 15
MIN_POINTS_RANDOM = 10


class ConfigurationError(ValueError):
    """The experiment configuration or dataset cannot be run."""


@dataclass
class ExperimentConfig:
    """Everything a reproducible experiment needs, flat and serialisable."""

    data_path: str | None = None
    slice_start: int | None = None
    slice_end: int | None = None
    slice_label: str = ""
    mode: str = "agent"
    runs: int = 1
    master_seed: int = 0
    workers: int = 1
    # ingestion
    price_column: int = 2
    volume_column: int = 6
    volume_scale: float = 1e-7
    filter_threshold: float = 0.01
    # features
    denom_floor: float = 1e-9
    feature_norm: float = 6.0
    # agent
    gamma: float = 0.05
    mlimn: float = 75.0
    prob_eps: float = 1e-4
    alpha_min: float = 1e-3
    alpha_max: float = 1.0
    t_alpha: int = 1000
    fee_rate: float = 0.001
    initial_mon: float = 100.0
    hidden_size: int = 50
    loss_threshold: float | None = None  # None means initial_mon

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")
        if self.master_seed < 0:
            raise ConfigurationError(f"master_seed must be >= 0, got {self.master_seed}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.filter_threshold <= 0:
            raise ConfigurationError("filter_threshold must be positive")
        if self.volume_scale <= 0:
            raise ConfigurationError("volume_scale must be positive")
        if not 0 <= self.prob_eps <= 1:
            raise ConfigurationError("prob_eps must lie in [0, 1]")
        if not self.alpha_min < self.alpha_max:
            raise ConfigurationError("alpha_min must be below alpha_max")
        if self.t_alpha < 1:
            raise ConfigurationError("t_alpha must be >= 1")
        if not 0 <= self.fee_rate < 1:
            raise ConfigurationError("fee_rate must lie in [0, 1)")
        if self.initial_mon <= 0:
            raise ConfigurationError("initial_mon must be positive")
        if self.hidden_size < 0:
            raise ConfigurationError("hidden_size must be >= 0")
        if self.denom_floor <= 0 or self.feature_norm <= 0:
            raise ConfigurationError("denom_floor and feature_norm must be positive")
        has_start = self.slice_start is not None
        has_end = self.slice_end is not None
        if has_start != has_end:
            raise ConfigurationError("slice_start and slice_end must be given together")
        if has_start and not 0 <= self.slice_start < self.slice_end:
            raise ConfigurationError(
                f"invalid slice [{self.slice_start}, {self.slice_end})"
            )

    @property
    def resolved_loss_threshold(self) -> float:
        return self.initial_mon if self.loss_threshold is None else self.loss_threshold

    def agent_params(self) -> AgentParams:
        return AgentParams(
            gamma=self.gamma,
            mlimn=self.mlimn,
            prob_eps=self.prob_eps,
            alpha_min=self.alpha_min,
            alpha_max=self.alpha_max,
            t_alpha=self.t_alpha,
            fee_rate=self.fee_rate,
            initial_mon=self.initial_mon,
            hidden_size=self.hidden_size,
            denom_floor=self.denom_floor,
            feature_norm=self.feature_norm,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **overrides) -> ExperimentConfig:
        return replace(self, **overrides)


@dataclass(frozen=True)
class RunResult:
    """Per-run outcome: final savings and total wealth plus loop counters."""

    run_index: int
    final_sav: float
    final_twth: float
    steps_taken: int
    episodes: int
    steps: list[StepRecord] | None = None


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    median: float
    std_dev: float
    p_loss: float
    min: float
    max: float
    n: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "std_dev": self.std_dev,
            "p_loss": self.p_loss,
            "min": self.min,
            "max": self.max,
            "n": self.n,
        }


@dataclass(frozen=True)
class ExperimentResult:
    results: list[RunResult]
    twth: AggregateStats
    sav: AggregateStats | None  # absent for the random baseline


def aggregate(values: Iterable[float], loss_threshold: float = 100.0) -> AggregateStats:
    """Descriptive statistics of run outcomes.

    Sample standard deviation uses the n-1 denominator (0 for a single run);
    p_loss is the fraction of values at or below the loss threshold.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("aggregate() needs at least one value")
    std_dev = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return AggregateStats(
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        std_dev=std_dev,
        p_loss=float(np.mean(arr <= loss_threshold)),
        min=float(arr.min()),
        max=float(arr.max()),
        n=int(arr.size),
    )


def load_series(config: ExperimentConfig) -> FilteredSeries:
    """Parse, filter and optionally slice the configured dataset."""
    if config.data_path is None:
        raise ConfigurationError("no data_path configured")
    raw = parse_klines(
        config.data_path,
        price_column=config.price_column,
        volume_column=config.volume_column,
        volume_scale=config.volume_scale,
    )
    series = filter_series(raw, threshold=config.filter_threshold)
    if config.slice_start is not None:
        window = DatasetSlice(config.slice_start, config.slice_end, config.slice_label)
        try:
            series = slice_series(series, window)
        except IndexError as exc:
            raise ConfigurationError(str(exc)) from None
    return series


def _validate_series(series: FilteredSeries, mode: str) -> None:
    needed = MIN_POINTS_AGENT if mode == "agent" else MIN_POINTS_RANDOM
    if len(series) < needed:
        raise ConfigurationError(
            f"filtered series has {len(series)} points; {mode} mode needs >= {needed}"
        )


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent, order-insensitive RNG stream for one run."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, run_index]))


def run_once(
    config: ExperimentConfig,
    run_index: int,
    series: FilteredSeries | None = None,
    record_steps: bool = False,
) -> RunResult:
    """Execute a single run and report its terminal accounting.

    final_twth = sav + wealth at the last observed block price + res; the
    baseline never touches sav or res, so there it reduces to plain wealth.
    """
    if series is None:
        series = load_series(config)
    _validate_series(series, config.mode)
    rng = run_rng(config.master_seed, run_index)
    params = config.agent_params()
    if config.mode == "agent":
        summary = AgentRun(series, params, rng, record_steps=record_steps).run()
    else:
        summary = random_run(series, params, rng, record_steps=record_steps)
    wallet = summary.wallet
    wth_final = wallet.wealth(summary.last_price)
    return RunResult(
        run_index=run_index,
        final_sav=float(wallet.sav),
        final_twth=float(wallet.sav + wth_final + wallet.res),
        steps_taken=summary.steps,
        episodes=summary.episodes,
        steps=summary.records,
    )


def _run_task(args) -> RunResult:
    config, series, run_index, trace_run = args
    return run_once(config, run_index, series, record_steps=(run_index == trace_run))


def run_experiment(
    config: ExperimentConfig,
    series: FilteredSeries | None = None,
    trace_run: int | None = None,
) -> ExperimentResult:
    """Run the full Monte Carlo experiment described by ``config``.

    Results are ordered by run index regardless of worker count. When
    ``trace_run`` names a run, that run's step records are attached to its
    result.
    """
    config.validate()
    if series is None:
        series = load_series(config)
    _validate_series(series, config.mode)

    tasks = [(config, series, idx, trace_run) for idx in range(config.runs)]
    if config.workers <= 1:
        results = [_run_task(task) for task in tasks]
    else:
        chunk = max(1, config.runs // (config.workers * 4))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    results.sort(key=lambda r: r.run_index)

    threshold = config.resolved_loss_threshold
    twth_stats = aggregate((r.final_twth for r in results), threshold)
    sav_stats = (
        aggregate((r.final_sav for r in results), threshold)
        if config.mode == "agent"
        else None
    )
    return ExperimentResult(results=results, twth=twth_stats, sav=sav_stats)
