"""Binary linear program solver: depth-first branch and bound.

Minimizes an objective over {0,1}^n subject to <=, =, >= rows, using exact
integer/rational arithmetic throughout (no tolerances). The search keeps the
best feasible assignment found so far and returns it when the wall-clock
budget or the optional node cap expires, matching the use case where a quick
feasible answer beats an exhaustive search.

Pruning is LP-free: each node bounds the objective by relaxing every unfixed
variable to its objective-improving value, and detects dead rows from the
attainable min/max of their unfixed part.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Coeff = Union[int, Fraction]

_LE, _EQ, _GE = 0, 1, 2
_REL_CODES = {"<=": _LE, "=": _EQ, ">=": _GE}


class MalformedProblem(ValueError):
    """Problem construction failed: bad row shape or variable index."""


class LengthMismatch(ValueError):
    """Assignment length does not match the problem's variable count."""


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE_INCUMBENT = "feasible-incumbent"
    INFEASIBLE = "infeasible"
    TIMED_OUT = "timed-out"

    @property
    def has_assignment(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_INCUMBENT)


@dataclass(frozen=True, slots=True)
class SolveOutcome:
    """Result of one solve call.

    ``assignment`` and ``objective_value`` are present exactly when the
    status carries a feasible point.
    """

    status: SolveStatus
    assignment: tuple[int, ...] | None
    objective_value: Coeff | None
    nodes_explored: int
    elapsed: float


class BlpProblem:
    """A minimization over binary variables with linear constraint rows.

    ``objective`` is a dense sequence of length ``n_vars`` or a sparse
    mapping from variable index to coefficient. Each row is
    ``(coeffs, relation, rhs)`` with coeffs dense or sparse likewise and
    relation one of ``"<="``, ``"="``, ``">="``.
    """

    __slots__ = ("n_vars", "objective", "offset", "rows")

    def __init__(
        self,
        n_vars: int,
        objective: Sequence[Coeff] | Mapping[int, Coeff],
        rows: Iterable[tuple[Sequence[Coeff] | Mapping[int, Coeff], str, Coeff]],
        offset: Coeff = 0,
    ) -> None:
        if n_vars < 0:
            raise MalformedProblem("n_vars must be non-negative")
        self.n_vars = n_vars
        self.objective = self._dense(objective, "objective")
        self.offset = offset
        normalized = []
        for coeffs, relation, rhs in rows:
            if relation not in _REL_CODES:
                raise MalformedProblem(f"unknown relation {relation!r}")
            normalized.append((self._sparse(coeffs), relation, rhs))
        self.rows = tuple(normalized)

    def _dense(self, coeffs, what: str) -> tuple[Coeff, ...]:
        if isinstance(coeffs, Mapping):
            out = [0] * self.n_vars
            for j, c in coeffs.items():
                self._check_index(j)
                out[j] = c
            return tuple(out)
        dense = tuple(coeffs)
        if len(dense) != self.n_vars:
            raise MalformedProblem(
                f"{what} has {len(dense)} coefficients for {self.n_vars} variables"
            )
        return dense

    def _sparse(self, coeffs) -> tuple[tuple[int, Coeff], ...]:
        if isinstance(coeffs, Mapping):
            for j in coeffs:
                self._check_index(j)
            return tuple(sorted((j, c) for j, c in coeffs.items() if c != 0))
        dense = tuple(coeffs)
        if len(dense) != self.n_vars:
            raise MalformedProblem(
                f"row has {len(dense)} coefficients for {self.n_vars} variables"
            )
        return tuple((j, c) for j, c in enumerate(dense) if c != 0)

    def _check_index(self, j) -> None:
        if not isinstance(j, int) or not 0 <= j < self.n_vars:
            raise MalformedProblem(f"variable index {j!r} out of range")

    def row_dense(self, i: int) -> tuple[Coeff, ...]:
        """Dense coefficient vector of row ``i`` (for inspection/tests)."""
        out = [0] * self.n_vars
        for j, c in self.rows[i][0]:
            out[j] = c
        return tuple(out)


def check_feasible(problem: BlpProblem, assignment: Sequence[int]) -> bool:
    """Exact satisfaction of every row by a full binary assignment."""
    if len(assignment) != problem.n_vars:
        raise LengthMismatch(
            f"assignment has {len(assignment)} values for {problem.n_vars} variables"
        )
    for coeffs, relation, rhs in problem.rows:
        lhs: Coeff = 0
        for j, c in coeffs:
            if assignment[j]:
                lhs += c
        if relation == "<=" and not lhs <= rhs:
            return False
        if relation == "=" and not lhs == rhs:
            return False
        if relation == ">=" and not lhs >= rhs:
            return False
    return True


def solve(
    problem: BlpProblem,
    budget: float,
    *,
    max_nodes: int | None = None,
    improving_values: bool = False,
) -> SolveOutcome:
    """Branch-and-bound minimization of ``problem``.

    ``budget`` is a wall-clock allowance in seconds; ``max_nodes`` is an
    optional deterministic cap on explored nodes (useful when reproducible
    truncation matters more than a precise time limit). Either limit expiring
    returns the best feasible assignment found so far, or a timed-out result
    when none exists. With enough budget the result is OPTIMAL or INFEASIBLE
    and the search is fully deterministic.

    Branching picks the unfixed variable with the largest absolute objective
    coefficient (ties to the lowest index) and tries value 1 first, which
    favours selection-style problems that must pull items in to become
    feasible. With ``improving_values`` each variable instead tries its
    objective-improving value first, which suits problems whose cheap
    solutions use few items.

    At every node the solver also tests the completion that sets all
    remaining variables to their objective-improving values; when it
    satisfies every row it equals the node's lower bound, so it is recorded
    as the subtree's optimum and the subtree is pruned.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if max_nodes is not None and max_nodes <= 0:
        raise ValueError("max_nodes must be positive")

    start = time.monotonic()
    deadline = start + budget
    n = problem.n_vars
    objective = problem.objective
    rows = problem.rows
    n_rows = len(rows)

    rels = [_REL_CODES[rel] for _, rel, _ in rows]
    rhss = [rhs for _, _, rhs in rows]
    acts: list[Coeff] = [0] * n_rows
    neg_rems: list[Coeff] = [0] * n_rows
    pos_rems: list[Coeff] = [0] * n_rows
    # Contribution of the objective-improving completion of unfixed vars.
    imp_rems: list[Coeff] = [0] * n_rows
    imp_value = [1 if objective[j] < 0 else 0 for j in range(n)]
    cols: list[list[tuple[int, Coeff]]] = [[] for _ in range(n)]
    for i, (coeffs, _, _) in enumerate(rows):
        for j, c in coeffs:
            cols[j].append((i, c))
            if c < 0:
                neg_rems[i] += c
            else:
                pos_rems[i] += c
            if imp_value[j]:
                imp_rems[i] += c

    def row_dead(i: int) -> bool:
        lo = acts[i] + neg_rems[i]
        hi = acts[i] + pos_rems[i]
        rel = rels[i]
        if rel == _LE:
            return lo > rhss[i]
        if rel == _GE:
            return hi < rhss[i]
        return lo > rhss[i] or hi < rhss[i]

    def imp_bad(i: int) -> bool:
        lhs = acts[i] + imp_rems[i]
        rel = rels[i]
        if rel == _LE:
            return lhs > rhss[i]
        if rel == _GE:
            return lhs < rhss[i]
        return lhs != rhss[i]

    def finish(status: SolveStatus, nodes: int) -> SolveOutcome:
        elapsed = time.monotonic() - start
        if status.has_assignment:
            assert best_assignment is not None
            if not check_feasible(problem, best_assignment):
                raise RuntimeError("solver produced an infeasible assignment")
            return SolveOutcome(status, best_assignment, best_obj, nodes, elapsed)
        return SolveOutcome(status, None, None, nodes, elapsed)

    best_assignment: tuple[int, ...] | None = None
    best_obj: Coeff | None = None

    # Rows can be dead before any branching (constant rows, empty problems).
    if any(row_dead(i) for i in range(n_rows)):
        return finish(SolveStatus.INFEASIBLE, 0)
    if n == 0:
        best_assignment, best_obj = (), problem.offset
        return finish(SolveStatus.OPTIMAL, 0)

    # Lower bound contribution of each unfixed variable is min(0, c).
    bound: Coeff = problem.offset + sum(c for c in objective if c < 0)
    bad_count = sum(1 for i in range(n_rows) if imp_bad(i))
    if bad_count == 0:
        best_assignment = tuple(imp_value)
        best_obj = bound
        return finish(SolveStatus.OPTIMAL, 0)

    order = sorted(range(n), key=lambda j: (-abs(objective[j]), j))
    fixed = [0] * n

    def try_order(coeff: Coeff) -> tuple[int, int]:
        if improving_values and coeff > 0:
            return (0, 1)
        return (1, 0)

    stack: list[tuple[int, int, bool]] = []
    for value in try_order(objective[order[0]])[::-1]:
        stack.append((0, value, False))

    nodes = 0
    while stack:
        depth, value, is_undo = stack.pop()
        j = order[depth]
        c = objective[j]
        if is_undo:
            bound -= (c if value else 0) - (c if c < 0 else 0)
            for i, a in cols[j]:
                was_bad = imp_bad(i)
                if value:
                    acts[i] -= a
                if a < 0:
                    neg_rems[i] += a
                else:
                    pos_rems[i] += a
                if imp_value[j]:
                    imp_rems[i] += a
                if imp_bad(i) != was_bad:
                    bad_count += 1 if not was_bad else -1
            continue

        nodes += 1
        if max_nodes is not None and nodes > max_nodes:
            return finish(
                SolveStatus.FEASIBLE_INCUMBENT
                if best_assignment is not None
                else SolveStatus.TIMED_OUT,
                nodes - 1,
            )
        if time.monotonic() > deadline:
            return finish(
                SolveStatus.FEASIBLE_INCUMBENT
                if best_assignment is not None
                else SolveStatus.TIMED_OUT,
                nodes - 1,
            )

        fixed[j] = value
        bound += (c if value else 0) - (c if c < 0 else 0)
        for i, a in cols[j]:
            was_bad = imp_bad(i)
            if value:
                acts[i] += a
            if a < 0:
                neg_rems[i] -= a
            else:
                pos_rems[i] -= a
            if imp_value[j]:
                imp_rems[i] -= a
            if imp_bad(i) != was_bad:
                bad_count += 1 if not was_bad else -1
        stack.append((depth, value, True))

        if best_obj is not None and bound >= best_obj:
            continue
        dead = False
        for i, _ in cols[j]:
            if row_dead(i):
                dead = True
                break
        if dead:
            continue

        if bad_count == 0:
            # The improving completion of this node is feasible and matches
            # the node's lower bound: it is the optimum of the subtree.
            assignment = fixed[:]
            for later in range(depth + 1, n):
                assignment[order[later]] = imp_value[order[later]]
            best_assignment = tuple(assignment)
            best_obj = bound
            continue

        if depth + 1 == n:
            continue

        nxt = objective[order[depth + 1]]
        for value in try_order(nxt)[::-1]:
            stack.append((depth + 1, value, False))

    return finish(
        SolveStatus.OPTIMAL if best_assignment is not None else SolveStatus.INFEASIBLE,
        nodes,
    )
