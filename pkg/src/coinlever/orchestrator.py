"""Iterative processing of a payment backlog with pool bookkeeping.

Each iteration funds the most urgent batch via the selector cascade, then
updates the world: spent UTXOs leave the pool, a fallback's change output
re-enters it, and funded payments leave the backlog. Two runners cover the
knapsack-only and leverage-enabled flavours.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import (
    FeeParams,
    NoGoodPrefix,
    PaymentRequest,
    Transaction,
    Utxo,
    UtxoPool,
    tx_cost,
)
from .selection import (
    BasicOutcome,
    LeverageParams,
    Method,
    SolverAttempt,
    attempt_selection,
)

DEFAULT_CANDIDATE_WINDOW = 64


class UnknownUtxo(KeyError):
    """An iteration claims to spend a UTXO that is not in the pool."""


class Exhausted(Exception):
    """The pool ran dry mid-run; ``partial`` holds the completed records."""

    def __init__(self, iteration: int, partial: "FullRunResult") -> None:
        super().__init__(f"pool exhausted at iteration {iteration}")
        self.iteration = iteration
        self.partial = partial


@dataclass(frozen=True, slots=True)
class WorldState:
    """UTXO pool, full payment backlog, still-pending subset, iteration count."""

    utxo_pool: UtxoPool
    payment_pool: tuple[PaymentRequest, ...]
    pending: tuple[PaymentRequest, ...]
    iteration: int = 0

    @classmethod
    def initial(
        cls,
        pool: UtxoPool,
        payments: Sequence[PaymentRequest],
        pending: Sequence[PaymentRequest] | None = None,
    ) -> "WorldState":
        ordered = tuple(sorted(payments, key=lambda p: p.urgency_rank))
        if pending is None:
            chosen = ordered
        else:
            ids = {p.id for p in pending}
            chosen = tuple(p for p in ordered if p.id in ids)
        return cls(pool, ordered, chosen, 0)


@dataclass(frozen=True, slots=True)
class IterationRecord:
    """What one iteration did: method, transactions, and pool effects."""

    iteration: int
    method: Method
    transactions: tuple[Transaction, ...]
    processed_ids: tuple[str, ...]
    cost: int
    solver_attempts: tuple[SolverAttempt, ...]
    spent_utxo_ids: tuple[str, ...]
    change_utxo: Utxo | None


@dataclass(frozen=True, slots=True)
class FullRunResult:
    records: tuple[IterationRecord, ...]
    final_state: WorldState

    @property
    def processed_count(self) -> int:
        return sum(len(r.processed_ids) for r in self.records)

    @property
    def total_cost(self) -> int:
        return sum(r.cost for r in self.records)

    @property
    def method_counts(self) -> Mapping[Method, int]:
        counts = {method: 0 for method in Method}
        for record in self.records:
            counts[record.method] += 1
        return counts


def _build_record(
    iteration: int, outcome: BasicOutcome, fees: FeeParams
) -> IterationRecord:
    transactions = outcome.transactions
    processed = tuple(p.id for tx in transactions for p in tx.payments)
    spent = [u.id for u in outcome.primary_tx.inputs]
    if outcome.secondary_tx is not None:
        bridge_id = outcome.bridge.id if outcome.bridge else None
        spent.extend(u.id for u in outcome.secondary_tx.inputs if u.id != bridge_id)
    change_utxo = None
    if outcome.method is Method.FALLBACK and outcome.primary_tx.change > 0:
        change_utxo = Utxo(f"change:{iteration}", outcome.primary_tx.change)
    return IterationRecord(
        iteration=iteration,
        method=outcome.method,
        transactions=transactions,
        processed_ids=processed,
        cost=sum(tx_cost(tx, fees) for tx in transactions),
        solver_attempts=outcome.attempts,
        spent_utxo_ids=tuple(spent),
        change_utxo=change_utxo,
    )


def apply_update(state: WorldState, record: IterationRecord) -> WorldState:
    """Next world state after an iteration's pool and backlog effects."""
    try:
        pool = state.utxo_pool.without(record.spent_utxo_ids)
    except KeyError as exc:
        raise UnknownUtxo(str(exc)) from exc
    if record.change_utxo is not None:
        pool = pool.with_utxo(record.change_utxo)
    done = set(record.processed_ids)
    return WorldState(
        utxo_pool=pool,
        payment_pool=tuple(p for p in state.payment_pool if p.id not in done),
        pending=tuple(p for p in state.pending if p.id not in done),
        iteration=record.iteration,
    )


def step(
    state: WorldState,
    batch_size: int,
    fees: FeeParams,
    budget: float,
    *,
    lev: LeverageParams | None = None,
    candidate_window: int = DEFAULT_CANDIDATE_WINDOW,
    max_nodes: int | None = None,
) -> tuple[WorldState, IterationRecord]:
    """Run one iteration over the most urgent pending payments.

    Raises NoGoodPrefix (from the fallback) when the pool cannot fund even
    the current batch.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if not state.pending:
        raise ValueError("nothing pending")
    iteration = state.iteration + 1
    batch = state.pending[:batch_size]
    candidates: tuple[PaymentRequest, ...] = ()
    if lev is not None:
        candidates = state.pending[batch_size : batch_size + candidate_window]
    outcome = attempt_selection(
        state.utxo_pool,
        batch,
        fees,
        budget,
        candidates=candidates,
        lev=lev,
        max_nodes=max_nodes,
        change_id=f"lev-change:{iteration}",
    )
    record = _build_record(iteration, outcome, fees)
    return apply_update(state, record), record


def _run_full(
    state: WorldState,
    batch_size: int,
    fees: FeeParams,
    budget: float,
    lev: LeverageParams | None,
    candidate_window: int,
    max_nodes: int | None,
) -> FullRunResult:
    records: list[IterationRecord] = []
    while state.pending:
        try:
            state, record = step(
                state,
                batch_size,
                fees,
                budget,
                lev=lev,
                candidate_window=candidate_window,
                max_nodes=max_nodes,
            )
        except NoGoodPrefix as exc:
            partial = FullRunResult(tuple(records), state)
            raise Exhausted(state.iteration + 1, partial) from exc
        records.append(record)
    return FullRunResult(tuple(records), state)


def run_full_knapsack(
    state: WorldState,
    batch_size: int,
    fees: FeeParams,
    budget: float,
    *,
    max_nodes: int | None = None,
) -> FullRunResult:
    """Process every pending payment, knapsack first with fallback."""
    return _run_full(state, batch_size, fees, budget, None, 0, max_nodes)


def run_full_leverage(
    state: WorldState,
    batch_size: int,
    fees: FeeParams,
    lev: LeverageParams,
    budget: float,
    *,
    candidate_window: int = DEFAULT_CANDIDATE_WINDOW,
    max_nodes: int | None = None,
) -> FullRunResult:
    """Process every pending payment, trying leverage before the fallback."""
    return _run_full(state, batch_size, fees, budget, lev, candidate_window, max_nodes)
