"""Dataset CSV contracts, JSON report serialization, and summary tables.

CSV formats (UTF-8, comma separated, header mandatory):

* UTXOs: ``id,value_sat``
* Payments: ``id,value_sat[,urgency_rank]`` (rank defaults to row order)

JSON reports are fully deterministic: keys are sorted, satoshi amounts are
integers, and every rational (USD figures, rates, boost factors) is an
explicit decimal or ``num/den`` string, never a binary float.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .blp import SolveStatus
from .model import PaymentRequest, Transaction, Utxo
from .orchestrator import FullRunResult, IterationRecord
from .selection import Method, SolverAttempt
from .simulation import (
    Mode,
    RepetitionOutcome,
    SavingsSummary,
    ScenarioConfig,
    ScenarioReport,
    SweepCell,
    as_fraction,
)


class ParseError(ValueError):
    """A dataset file row could not be parsed; ``line`` is 1-based."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateId(ValueError):
    pass


class DuplicateRank(ValueError):
    pass


class NonPositiveValue(ValueError):
    pass


class IoError(OSError):
    """Wrapper for filesystem failures during report emission."""


UTXO_HEADER = ["id", "value_sat"]
PAYMENT_HEADER = ["id", "value_sat"]
PAYMENT_HEADER_RANKED = ["id", "value_sat", "urgency_rank"]


def _read_rows(path: str | Path, expected_headers: list[list[str]]):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "missing header") from None
        if header not in expected_headers:
            raise ParseError(1, f"unexpected header {header!r}")
        rows = [(line, row) for line, row in enumerate(reader, start=2) if row]
    return header, rows


def _parse_value(line: int, text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(line, f"bad integer {text!r}") from None
    if value <= 0:
        raise NonPositiveValue(f"line {line}: value must be positive, got {value}")
    return value


def load_utxos(path: str | Path) -> tuple[Utxo, ...]:
    """Parse a UTXO dataset file (``id,value_sat``)."""
    _, rows = _read_rows(path, [UTXO_HEADER])
    seen: set[str] = set()
    utxos = []
    for line, row in rows:
        if len(row) != 2:
            raise ParseError(line, f"expected 2 fields, got {len(row)}")
        uid, value = row[0], _parse_value(line, row[1])
        if uid in seen:
            raise DuplicateId(f"line {line}: duplicate id {uid!r}")
        seen.add(uid)
        utxos.append(Utxo(uid, value))
    return tuple(utxos)


def load_payments(path: str | Path) -> tuple[PaymentRequest, ...]:
    """Parse a payment dataset file (``id,value_sat[,urgency_rank]``)."""
    header, rows = _read_rows(path, [PAYMENT_HEADER, PAYMENT_HEADER_RANKED])
    ranked = header == PAYMENT_HEADER_RANKED
    seen: set[str] = set()
    seen_ranks: set[int] = set()
    payments = []
    for order, (line, row) in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
        pid, value = row[0], _parse_value(line, row[1])
        if pid in seen:
            raise DuplicateId(f"line {line}: duplicate id {pid!r}")
        seen.add(pid)
        if ranked:
            try:
                rank = int(row[2])
            except ValueError:
                raise ParseError(line, f"bad urgency_rank {row[2]!r}") from None
        else:
            rank = order
        if rank in seen_ranks:
            raise DuplicateRank(f"line {line}: duplicate urgency_rank {rank}")
        seen_ranks.add(rank)
        payments.append(PaymentRequest(pid, value, rank))
    return tuple(payments)


def write_utxos(path: str | Path, utxos: Iterable[Utxo]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(UTXO_HEADER)
        for u in utxos:
            writer.writerow([u.id, u.value])


def write_payments(path: str | Path, payments: Iterable[PaymentRequest]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(PAYMENT_HEADER_RANKED)
        for p in payments:
            writer.writerow([p.id, p.value, p.urgency_rank])


# --- rational formatting -------------------------------------------------


def fraction_str(value: Fraction) -> str:
    """Exact, parseable text: plain integer, decimal, or ``num/den``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den == 1:
        places = 0
        scaled = value
        while scaled.denominator != 1:
            scaled *= 10
            places += 1
        digits = abs(scaled.numerator)
        sign = "-" if value < 0 else ""
        whole, frac = divmod(digits, 10**places)
        return f"{sign}{whole}.{frac:0{places}d}"
    return f"{value.numerator}/{value.denominator}"


def fixed_str(value: Fraction, places: int) -> str:
    """Decimal string rounded to ``places`` (ties to even)."""
    q = 10**places
    scaled = round(Fraction(value) * q)
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    return f"{sign}{scaled // q}.{scaled % q:0{places}d}"


# --- JSON serialization ---------------------------------------------------


def _utxo_dict(u: Utxo) -> dict:
    return {"id": u.id, "value_sat": u.value}


def _payment_dict(p: PaymentRequest) -> dict:
    return {"id": p.id, "value_sat": p.value, "urgency_rank": p.urgency_rank}


def tx_dict(tx: Transaction) -> dict:
    return {
        "inputs": [_utxo_dict(u) for u in tx.inputs],
        "payments": [_payment_dict(p) for p in tx.payments],
        "change_sat": tx.change,
        "overpayment_sat": tx.overpayment,
        "size_bytes": tx.size_bytes,
    }


def _tx_from(d: dict) -> Transaction:
    return Transaction(
        inputs=tuple(Utxo(u["id"], u["value_sat"]) for u in d["inputs"]),
        payments=tuple(
            PaymentRequest(p["id"], p["value_sat"], p["urgency_rank"])
            for p in d["payments"]
        ),
        change=d["change_sat"],
        overpayment=d["overpayment_sat"],
    )


def attempt_dict(a: SolverAttempt) -> dict:
    objective = a.objective
    if isinstance(objective, Fraction):
        objective = fraction_str(objective)
    return {
        "method": a.method.value,
        "status": a.status.value,
        "nodes": a.nodes,
        "objective": objective,
    }


def _attempt_from(d: dict) -> SolverAttempt:
    objective = d["objective"]
    if isinstance(objective, str):
        objective = Fraction(objective)
    return SolverAttempt(
        Method(d["method"]), SolveStatus(d["status"]), d["nodes"], objective
    )


def _record_dict(r: IterationRecord) -> dict:
    return {
        "iteration": r.iteration,
        "method": r.method.value,
        "transactions": [tx_dict(tx) for tx in r.transactions],
        "processed_ids": list(r.processed_ids),
        "cost_sat": r.cost,
        "solver_attempts": [attempt_dict(a) for a in r.solver_attempts],
        "spent_utxo_ids": list(r.spent_utxo_ids),
        "change_utxo": _utxo_dict(r.change_utxo) if r.change_utxo else None,
    }


def _record_from(d: dict) -> IterationRecord:
    change = d["change_utxo"]
    return IterationRecord(
        iteration=d["iteration"],
        method=Method(d["method"]),
        transactions=tuple(_tx_from(tx) for tx in d["transactions"]),
        processed_ids=tuple(d["processed_ids"]),
        cost=d["cost_sat"],
        solver_attempts=tuple(_attempt_from(a) for a in d["solver_attempts"]),
        spent_utxo_ids=tuple(d["spent_utxo_ids"]),
        change_utxo=Utxo(change["id"], change["value_sat"]) if change else None,
    )


def config_dict(config: ScenarioConfig) -> dict:
    return {
        "gamma": config.gamma,
        "batch_size": config.batch_size,
        "beta": fraction_str(config.beta) if config.beta is not None else None,
        "extra_min": config.extra_min,
        "extra_max": config.extra_max,
        "utxo_pool_size": config.utxo_pool_size,
        "payment_pool_size": config.payment_pool_size,
        "min_payment": config.min_payment,
        "iterations_per_sample": config.iterations_per_sample,
        "repetitions": config.repetitions,
        "rng_seed": config.rng_seed,
        "budget_ms": config.budget_ms,
        "node_budget": config.node_budget,
        "candidate_window": config.candidate_window,
        "dust": config.dust,
        "make_change": config.make_change,
        "btc_usd": fraction_str(config.btc_usd),
    }


def config_from_dict(d: dict) -> ScenarioConfig:
    data = dict(d)
    if data.get("beta") is not None:
        data["beta"] = as_fraction(data["beta"])
    if data.get("btc_usd") is not None:
        data["btc_usd"] = as_fraction(data["btc_usd"])
    return ScenarioConfig(**data)


def _repetition_dict(rep: RepetitionOutcome) -> dict:
    return {
        "index": rep.index,
        "ok": rep.ok,
        "failure": rep.failure,
        "sample_digest": rep.sample_digest,
        "records": [_record_dict(r) for r in rep.records],
    }


def _repetition_from(d: dict) -> RepetitionOutcome:
    return RepetitionOutcome(
        index=d["index"],
        ok=d["ok"],
        failure=d["failure"],
        sample_digest=d["sample_digest"],
        records=tuple(_record_from(r) for r in d["records"]),
    )


def report_dict(report: ScenarioReport) -> dict:
    return {
        "mode": report.mode.value,
        "config": config_dict(report.config),
        "repetitions": [_repetition_dict(rep) for rep in report.repetitions],
        "summary": {
            "iterations_total": report.iterations_total,
            "payments_processed": report.payments_processed,
            "total_cost_sat": report.total_cost,
            "failed_repetitions": report.failed_count,
            "fallback_count": report.method_count(Method.FALLBACK),
            "knapsack_count": report.method_count(Method.KNAPSACK),
            "leverage_count": report.method_count(Method.LEVERAGE),
            "fallback_rate": fixed_str(report.fallback_rate, 6),
            "knapsack_rate": fixed_str(report.knapsack_rate, 6),
            "leverage_rate": fixed_str(report.leverage_rate, 6),
            "cost_per_payment_usd": fixed_str(report.cost_per_payment_usd, 6),
        },
    }


def report_from_dict(d: dict) -> ScenarioReport:
    return ScenarioReport(
        mode=Mode(d["mode"]),
        config=config_from_dict(d["config"]),
        repetitions=tuple(_repetition_from(rep) for rep in d["repetitions"]),
    )


def savings_dict(savings: SavingsSummary) -> dict:
    return {
        "percent_per_payment": fraction_str(savings.percent_per_payment),
        "usd_per_payment": fraction_str(savings.usd_per_payment),
    }


def savings_from_dict(d: dict) -> SavingsSummary:
    return SavingsSummary(
        percent_per_payment=Fraction(d["percent_per_payment"]),
        usd_per_payment=Fraction(d["usd_per_payment"]),
    )


def cell_dict(cell: SweepCell) -> dict:
    return {
        "config": config_dict(cell.config),
        "no_leverage": report_dict(cell.no_leverage) if cell.no_leverage else None,
        "leverage": report_dict(cell.leverage) if cell.leverage else None,
        "savings": savings_dict(cell.savings) if cell.savings else None,
        "error": cell.error,
    }


def cell_from_dict(d: dict) -> SweepCell:
    return SweepCell(
        config=config_from_dict(d["config"]),
        no_leverage=report_from_dict(d["no_leverage"]) if d["no_leverage"] else None,
        leverage=report_from_dict(d["leverage"]) if d["leverage"] else None,
        savings=savings_from_dict(d["savings"]) if d["savings"] else None,
        error=d["error"],
    )


def run_result_dict(result: FullRunResult, error: str | None = None) -> dict:
    counts = result.method_counts
    return {
        "records": [_record_dict(r) for r in result.records],
        "totals": {
            "iterations": len(result.records),
            "payments_processed": result.processed_count,
            "total_cost_sat": result.total_cost,
            "fallback_count": counts[Method.FALLBACK],
            "knapsack_count": counts[Method.KNAPSACK],
            "leverage_count": counts[Method.LEVERAGE],
        },
        "error": error,
    }


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --- summary tables --------------------------------------------------------

SUMMARY_COLUMNS = [
    "gamma",
    "M",
    "beta",
    "mode",
    "fallback_rate",
    "knapsack_rate",
    "leverage_rate",
    "payments_processed",
    "cost_per_payment_usd",
    "pct_savings_per_payment",
    "usd_savings_per_payment",
]


def _summary_rows(cells: Sequence[SweepCell]) -> list[list[str]]:
    rows = []
    for cell in cells:
        if cell.error is not None:
            continue
        beta = fixed_str(cell.config.effective_beta, 2)
        for mode_name, report in (
            ("no-leverage", cell.no_leverage),
            ("leverage", cell.leverage),
        ):
            if report is None:
                continue
            with_savings = mode_name == "leverage" and cell.savings is not None
            rows.append(
                [
                    str(cell.config.gamma),
                    str(cell.config.batch_size),
                    beta,
                    mode_name,
                    fixed_str(report.fallback_rate, 4),
                    fixed_str(report.knapsack_rate, 4),
                    fixed_str(report.leverage_rate, 4),
                    str(report.payments_processed),
                    fixed_str(report.cost_per_payment_usd, 6),
                    fixed_str(cell.savings.percent_per_payment, 6) if with_savings else "",
                    fixed_str(cell.savings.usd_per_payment, 6) if with_savings else "",
                ]
            )
    return rows


def summary_csv(cells: Sequence[SweepCell]) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in _summary_rows(cells):
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summary_markdown(cells: Sequence[SweepCell]) -> str:
    def table(headers: list[str], rows: list[list[str]]) -> list[str]:
        out = ["| " + " | ".join(headers) + " |"]
        out.append("|" + "|".join(" --- " for _ in headers) + "|")
        for row in rows:
            out.append("| " + " | ".join(row) + " |")
        return out

    result_headers = [
        "gamma",
        "M",
        "fallback rate",
        "knapsack rate",
        "leverage rate",
        "payments processed",
        "cost per payment (USD)",
    ]
    lines: list[str] = []
    for title, mode_name in (
        ("Results without leverage", "no-leverage"),
        ("Results with leverage", "leverage"),
    ):
        rows = [
            [r[0], r[1], r[4], r[5], r[6], r[7], "$" + r[8]]
            for r in _summary_rows(cells)
            if r[3] == mode_name
        ]
        lines.append(f"### {title}")
        lines.append("")
        lines.extend(table(result_headers, rows))
        lines.append("")
    savings_rows = [
        [r[0], r[1], r[9], "$" + r[10]]
        for r in _summary_rows(cells)
        if r[3] == "leverage" and r[9] != ""
    ]
    lines.append("### Savings per payment request")
    lines.append("")
    lines.extend(
        table(
            ["gamma", "M", "% savings per payment", "savings per payment (USD)"],
            savings_rows,
        )
    )
    lines.append("")
    return "\n".join(lines)


def emit_report(
    cells: Sequence[SweepCell], format: str, path: str | Path
) -> None:
    """Write a sweep's reports as JSON detail or a CSV/markdown summary."""
    if format == "json":
        _write_text(path, dumps({"cells": [cell_dict(c) for c in cells]}))
    elif format == "csv":
        _write_text(path, summary_csv(cells))
    elif format == "md":
        _write_text(path, summary_markdown(cells))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_report(path: str | Path) -> tuple[SweepCell, ...]:
    """Read back a JSON report produced by emit_report."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(cell_from_dict(c) for c in payload["cells"])
