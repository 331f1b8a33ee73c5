"""Fully online double Q-learning trader with a fast-learning-network
approximator, plus a seeded Monte Carlo backtest harness."""

from .agent import (
    ActionOutcome,
    AgentParams,
    AgentRun,
    Schedules,
    StepRecord,
    Terminal,
    Wallet,
    alpha_step,
    apply_terminal,
    check_terminal,
    compute_reward,
    epsilon_step,
    execute_action,
    random_run,
    select_action,
)
from .data_ingest import (
    DatasetSlice,
    EmptyInputError,
    FilteredSeries,
    InsufficientDataError,
    KlineParseError,
    RawKlineRow,
    filter_series,
    parse_klines,
    slice_series,
)
from .features import (
    DegenerateVolumeError,
    MarketBlock,
    RsiState,
    VolumeState,
    assemble_features,
    market_block,
    nmd_cascade,
)
from .fln import (
    FlnNetwork,
    activate,
    init_network,
    load_snapshot,
    q_values,
    save_snapshot,
    sgd_update,
)
from .harness import (
    AggregateStats,
    ConfigurationError,
    ExperimentConfig,
    ExperimentResult,
    RunResult,
    aggregate,
    load_series,
    run_experiment,
    run_once,
)
from .report import emit_report, histogram, write_trace

__version__ = "0.1.0"
