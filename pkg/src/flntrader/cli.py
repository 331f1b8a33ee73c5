"""Command-line backtest runner.

Parses kline CSV data, runs the Monte Carlo experiment, and writes the
delimited outputs, JSON report, summary table, and histogram figures into
the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data_ingest import EmptyInputError, InsufficientDataError, KlineParseError
from .harness import ConfigurationError, ExperimentConfig, load_series, run_experiment
from .report import emit_report, write_trace

# Keys the config file may set; CLI flags override file values.
_CLI_KEYS = {
    "data": "data_path",
    "mode": "mode",
    "runs": "runs",
    "seed": "master_seed",
    "workers": "workers",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backtest",
        description=(
            "Run a fully online double-Q trading agent (or a random baseline) "
            "over filtered kline data and report run statistics."
        ),
    )
    parser.add_argument("--data", help="kline CSV file")
    parser.add_argument(
        "--slice",
        metavar="START:END",
        help="half-open filtered-index range to backtest, e.g. 0:2500",
    )
    parser.add_argument("--mode", choices=("agent", "random"), help="run mode")
    parser.add_argument("--runs", type=int, help="number of Monte Carlo runs")
    parser.add_argument("--seed", type=int, help="master seed (non-negative)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--config", metavar="FILE", help="JSON file overriding any config key"
    )
    parser.add_argument(
        "--workers", type=int, help="parallel worker processes (default 1)"
    )
    parser.add_argument(
        "--trace",
        action="store_true",
        help="write a per-step trace of run 0 to trace.jsonl",
    )
    parser.add_argument(
        "--no-figures", action="store_true", help="skip histogram figure rendering"
    )
    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path}: expected a JSON object")
    return data


def _parse_slice(text: str) -> tuple[int, int]:
    try:
        start_text, end_text = text.split(":", 1)
        return int(start_text), int(end_text)
    except ValueError:
        raise ConfigurationError(
            f"invalid --slice {text!r}; expected START:END integers"
        ) from None


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, config file, and CLI flags (CLI wins)."""
    file_values = _load_config_file(args.config) if args.config else {}
    config = ExperimentConfig.from_dict(file_values)
    provided = set(file_values)
    overrides = {}
    for flag, key in _CLI_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
            provided.add(key)
    if args.slice is not None:
        overrides["slice_start"], overrides["slice_end"] = _parse_slice(args.slice)
        overrides["slice_label"] = args.slice
    if overrides:
        config = config.with_overrides(**overrides)
    for key, flag in (
        ("data_path", "--data"),
        ("mode", "--mode"),
        ("runs", "--runs"),
        ("master_seed", "--seed"),
    ):
        if key not in provided:
            raise ConfigurationError(f"missing {flag} (or config key {key!r})")
    config.validate()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        series = load_series(config)
        result = run_experiment(
            config, series=series, trace_run=0 if args.trace else None
        )
        written = emit_report(
            result, config, args.out, figures=not args.no_figures
        )
        if args.trace:
            trace_path = write_trace(
                result.results[0].steps or [], f"{args.out}/trace.jsonl"
            )
            written.append(trace_path)
    except (
        ConfigurationError,
        KlineParseError,
        EmptyInputError,
        InsufficientDataError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    stats = result.twth
    print(
        f"{config.mode} mode, {config.runs} runs on {len(series)} filtered points: "
        f"twth mean={stats.mean:.3f} median={stats.median:.3f} "
        f"p_loss={stats.p_loss:.3f}"
    )
    for path in written:
        print(f"  wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
