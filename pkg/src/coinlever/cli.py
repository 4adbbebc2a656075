"""Command-line front end.

Subcommands: ``select`` (one selection over given pools), ``run-full``
(iterate until the backlog is empty), ``simulate`` (the seeded scenario
protocol, single cell or the built-in sweep), and ``report`` (re-emit a
JSON report as a CSV/markdown summary).

Exit codes: 0 success, 1 usage error, 2 data error, 3 scenario error
(partial output is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import io as report_io
from .datasets import bundled_payment_dataset, bundled_utxo_dataset
from .model import NoGoodPrefix
from .orchestrator import (
    Exhausted,
    FullRunResult,
    WorldState,
    run_full_knapsack,
    run_full_leverage,
)
from .selection import attempt_selection
from .simulation import (
    DatasetTooSmall,
    Mode,
    ScenarioConfig,
    as_fraction,
    default_sweep_configs,
    sweep,
)

log = logging.getLogger("coinlever")

ENV_SEED = "COINLEVER_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SCENARIO = 3

DATA_ERRORS = (
    report_io.ParseError,
    report_io.DuplicateId,
    report_io.DuplicateRank,
    report_io.NonPositiveValue,
    DatasetTooSmall,
    FileNotFoundError,
    json.JSONDecodeError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


_CONFIG_FIELDS = {f.name for f in fields(ScenarioConfig)}


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with ScenarioConfig fields")
    parser.add_argument("--gamma", type=int, help="fee rate, satoshi per byte")
    parser.add_argument("--batch-size", type=int, help="urgent payments per iteration")
    parser.add_argument("--beta", help="leverage boost factor in [0,1]")
    parser.add_argument("--extra-min", type=int, help="min extra payments in leverage")
    parser.add_argument("--extra-max", type=int, help="max extra payments in leverage")
    parser.add_argument("--utxo-pool-size", type=int)
    parser.add_argument("--payment-pool-size", type=int)
    parser.add_argument("--min-payment", type=int)
    parser.add_argument("--iterations-per-sample", type=int)
    parser.add_argument("--repetitions", type=int)
    parser.add_argument("--seed", type=int, help="root RNG seed (rng_seed)")
    parser.add_argument("--budget-ms", type=int, help="solver wall budget per program")
    parser.add_argument("--node-budget", type=int, help="deterministic solver node cap")
    parser.add_argument("--candidate-window", type=int)
    parser.add_argument("--dust", type=int, help="dust threshold override")
    parser.add_argument("--make-change", type=int, help="make-change threshold override")
    parser.add_argument("--btc-usd", help="USD price of one BTC")


def _add_dataset_flags(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--utxos", required=required, help="UTXO CSV (id,value_sat)")
    parser.add_argument(
        "--payments", required=required, help="payment CSV (id,value_sat[,urgency_rank])"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="coinlever", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    select = sub.add_parser("select", help="one selection over the given pools")
    _add_dataset_flags(select, required=True)
    _add_scenario_flags(select)
    select.add_argument("--mode", choices=[m.value for m in Mode], default="no-leverage")
    select.add_argument("--out", help="write outcome JSON here (default stdout)")

    full = sub.add_parser("run-full", help="process the whole backlog")
    _add_dataset_flags(full, required=True)
    _add_scenario_flags(full)
    full.add_argument("--mode", choices=[m.value for m in Mode], default="no-leverage")
    full.add_argument("--out", help="write trace JSON here (default stdout)")

    simulate = sub.add_parser("simulate", help="seeded scenario protocol")
    _add_dataset_flags(simulate, required=False)
    _add_scenario_flags(simulate)
    simulate.add_argument(
        "--sweep", action="store_true", help="run the built-in 20-cell grid"
    )
    simulate.add_argument("--out", default="report.json", help="JSON detail path")
    simulate.add_argument(
        "--summary", help="also write a summary table to this path"
    )
    simulate.add_argument("--format", choices=["csv", "md"], default="md")

    report = sub.add_parser("report", help="summarize an existing JSON report")
    report.add_argument("--in", dest="input", required=True, help="JSON report path")
    report.add_argument("--format", choices=["csv", "md"], default="md")
    report.add_argument("--out", help="summary path (default stdout)")
    return parser


def _scenario_config(args: argparse.Namespace) -> ScenarioConfig:
    values: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        values.update(raw)

    flag_map = {
        "gamma": args.gamma,
        "batch_size": args.batch_size,
        "beta": args.beta,
        "extra_min": args.extra_min,
        "extra_max": args.extra_max,
        "utxo_pool_size": args.utxo_pool_size,
        "payment_pool_size": args.payment_pool_size,
        "min_payment": args.min_payment,
        "iterations_per_sample": args.iterations_per_sample,
        "repetitions": args.repetitions,
        "rng_seed": args.seed,
        "budget_ms": args.budget_ms,
        "node_budget": args.node_budget,
        "candidate_window": args.candidate_window,
        "dust": args.dust,
        "make_change": args.make_change,
        "btc_usd": args.btc_usd,
    }
    for name, value in flag_map.items():
        if value is not None:
            values[name] = value

    if "rng_seed" not in values and os.environ.get(ENV_SEED):
        values["rng_seed"] = int(os.environ[ENV_SEED])
    if values.get("beta") is not None:
        values["beta"] = as_fraction(values["beta"])
    if values.get("btc_usd") is not None:
        values["btc_usd"] = as_fraction(values["btc_usd"])
    values.setdefault("gamma", 22)
    values.setdefault("batch_size", 2)
    try:
        return ScenarioConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _load_world(args: argparse.Namespace) -> WorldState:
    utxos = report_io.load_utxos(args.utxos)
    payments = report_io.load_payments(args.payments)
    from .model import UtxoPool

    return WorldState.initial(UtxoPool.from_utxos(utxos), payments)


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_select(args: argparse.Namespace) -> int:
    config = _scenario_config(args)
    state = _load_world(args)
    if not state.pending:
        raise UsageError("payment file holds no requests")
    batch = state.pending[: config.batch_size]
    lev = config.leverage_params() if args.mode == Mode.LEVERAGE.value else None
    candidates = (
        state.pending[config.batch_size : config.batch_size + config.candidate_window]
        if lev
        else ()
    )
    try:
        outcome = attempt_selection(
            state.utxo_pool,
            batch,
            config.fee_params(),
            config.budget_seconds,
            candidates=candidates,
            lev=lev,
            max_nodes=config.node_budget,
        )
    except NoGoodPrefix as exc:
        print(f"selection failed: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    payload = {
        "method": outcome.method.value,
        "transactions": [report_io.tx_dict(tx) for tx in outcome.transactions],
        "solver_attempts": [report_io.attempt_dict(a) for a in outcome.attempts],
    }
    _write_or_print(report_io.dumps(payload), args.out)
    return EXIT_OK


def cmd_run_full(args: argparse.Namespace) -> int:
    config = _scenario_config(args)
    state = _load_world(args)
    fees = config.fee_params()
    error = None
    code = EXIT_OK
    try:
        if args.mode == Mode.LEVERAGE.value:
            result = run_full_leverage(
                state,
                config.batch_size,
                fees,
                config.leverage_params(),
                config.budget_seconds,
                candidate_window=config.candidate_window,
                max_nodes=config.node_budget,
            )
        else:
            result = run_full_knapsack(
                state,
                config.batch_size,
                fees,
                config.budget_seconds,
                max_nodes=config.node_budget,
            )
    except Exhausted as exc:
        result = exc.partial
        error = str(exc)
        code = EXIT_SCENARIO
    _write_or_print(report_io.dumps(report_io.run_result_dict(result, error)), args.out)
    if error:
        print(error, file=sys.stderr)
    return code


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _scenario_config(args)
    utxo_dataset = report_io.load_utxos(args.utxos) if args.utxos else bundled_utxo_dataset()
    payment_dataset = (
        report_io.load_payments(args.payments) if args.payments else bundled_payment_dataset()
    )
    configs = default_sweep_configs(config) if args.sweep else [config]
    log.info("running %d cell(s)", len(configs))
    cells = sweep(configs, utxo_dataset=utxo_dataset, payment_dataset=payment_dataset)
    report_io.emit_report(cells, "json", args.out)
    log.info("wrote %s", args.out)
    if args.summary:
        report_io.emit_report(cells, args.format, args.summary)
        log.info("wrote %s", args.summary)
    else:
        sys.stdout.write(report_io.summary_markdown(cells))
    failures = [c for c in cells if c.error is not None]
    for cell in failures:
        print(
            f"cell gamma={cell.config.gamma} M={cell.config.batch_size} "
            f"failed: {cell.error}",
            file=sys.stderr,
        )
    return EXIT_SCENARIO if failures else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cells = report_io.load_report(args.input)
    if args.format == "csv":
        text = report_io.summary_csv(cells)
    else:
        text = report_io.summary_markdown(cells)
    _write_or_print(text, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    handlers = {
        "select": cmd_select,
        "run-full": cmd_run_full,
        "simulate": cmd_simulate,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except report_io.IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
