"""Exact solvers for small 0-1 assignment programs and the grouped knapsack.

An assignment program picks exactly one column per row to minimize the sum
of column costs, subject to linear ``<=`` coupling rows, an optional
cardinality layer (exactly ``n`` distinct column values in use) and a list of
forbidden full assignments. Problems here are small, so branch-and-bound with
per-row minimum bounds is exact and fast enough.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DataError

FEAS_TOL = 1e-9


class IlpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    GAP_LIMIT = "GapLimit"
    TIME_LIMIT = "TimeLimit"  # stopped before any feasible assignment was found


@dataclass
class Coupling:
    """sum_r coef[r][assignment[r]] <= rhs"""

    coef: list[np.ndarray]
    rhs: float


@dataclass
class AssignmentIlp:
    costs: list[np.ndarray]  # per row, cost of each column
    couplings: list[Coupling] = field(default_factory=list)
    n_clusters: int | None = None  # requires all rows to share the same columns
    exclusions: list[tuple[int, ...]] = field(default_factory=list)
    labels: list[Sequence] | None = None  # optional column labels for reporting

    def __post_init__(self):
        self.costs = [np.asarray(c, dtype=float) for c in self.costs]
        if not self.costs:
            raise DataError("assignment problem needs at least one row")
        for r, c in enumerate(self.costs):
            if c.ndim != 1 or c.size == 0:
                raise DataError(f"row {r} has no columns")
            if not np.all(np.isfinite(c)):
                raise DataError(f"row {r} has non-finite costs")
        for k, cp in enumerate(self.couplings):
            cp.coef = [np.asarray(a, dtype=float) for a in cp.coef]
            if len(cp.coef) != len(self.costs) or any(
                a.shape != c.shape for a, c in zip(cp.coef, self.costs)
            ):
                raise DataError(f"coupling {k} does not match the row/column layout")
            if not all(np.all(np.isfinite(a)) for a in cp.coef) or not np.isfinite(cp.rhs):
                raise DataError(f"coupling {k} has non-finite coefficients")
        if self.n_clusters is not None:
            widths = {len(c) for c in self.costs}
            if len(widths) != 1:
                raise DataError("cardinality layer requires a common column set")
            if not 1 <= self.n_clusters <= widths.pop():
                raise DataError("n_clusters must lie between 1 and the number of columns")
        self.exclusions = [tuple(int(v) for v in e) for e in self.exclusions]
        for e in self.exclusions:
            if len(e) != len(self.costs):
                raise DataError("exclusion length differs from the row count")

    @property
    def n_rows(self) -> int:
        return len(self.costs)

    def objective(self, assignment) -> float:
        return float(sum(self.costs[r][j] for r, j in enumerate(assignment)))

    def is_feasible(self, assignment, tol: float = FEAS_TOL) -> bool:
        a = tuple(int(j) for j in assignment)
        if len(a) != self.n_rows or any(not 0 <= j < len(c) for j, c in zip(a, self.costs)):
            return False
        if a in self.exclusions:
            return False
        for cp in self.couplings:
            if sum(cp.coef[r][j] for r, j in enumerate(a)) > cp.rhs + tol:
                return False
        if self.n_clusters is not None and len(set(a)) != self.n_clusters:
            return False
        return True

    def to_lp_text(self) -> str:
        """Plain-text LP-style dump for cross-checking with an external solver."""
        lines = ["Minimize", " obj: " + " + ".join(
            f"{c:.12g} x_{r}_{j}" for r, row in enumerate(self.costs) for j, c in enumerate(row)
        ), "Subject To"]
        for r, row in enumerate(self.costs):
            lines.append(f" one_{r}: " + " + ".join(f"x_{r}_{j}" for j in range(len(row))) + " = 1")
        for k, cp in enumerate(self.couplings):
            terms = " + ".join(
                f"{a:.12g} x_{r}_{j}" for r, row in enumerate(cp.coef) for j, a in enumerate(row) if a != 0
            )
            lines.append(f" couple_{k}: {terms or '0'} <= {cp.rhs:.12g}")
        if self.n_clusters is not None:
            width = len(self.costs[0])
            lines.append(" card: " + " + ".join(f"u_{j}" for j in range(width)) + f" = {self.n_clusters}")
            for j in range(width):
                for r in range(self.n_rows):
                    lines.append(f" link_{r}_{j}: x_{r}_{j} - u_{j} <= 0")
                lines.append(f" use_{j}: " + " + ".join(f"x_{r}_{j}" for r in range(self.n_rows)) + f" - u_{j} >= 0")
        for e, excl in enumerate(self.exclusions):
            lines.append(f" excl_{e}: " + " + ".join(f"x_{r}_{j}" for r, j in enumerate(excl))
                         + f" <= {self.n_rows - 1}")
        lines.append("Binary")
        lines.append(" " + " ".join(f"x_{r}_{j}" for r, row in enumerate(self.costs) for j in range(len(row))))
        if self.n_clusters is not None:
            lines.append(" " + " ".join(f"u_{j}" for j in range(len(self.costs[0]))))
        lines.append("End")
        return "\n".join(lines)


@dataclass(frozen=True)
class IlpSolution:
    assignment: tuple[int, ...] | None
    objective: float
    status: IlpStatus
    gap: float
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.assignment is not None


class _Timeout(Exception):
    pass


class _Search:
    def __init__(self, prob: AssignmentIlp, gap_limit: float, deadline: float | None):
        self.p = prob
        self.gap_limit = gap_limit
        self.deadline = deadline
        self.best_obj = math.inf
        self.best: tuple[int, ...] | None = None
        self.nodes = 0
        spread = [float(c.max() - c.min()) for c in prob.costs]
        # rows with the widest cost spread first, ties by index
        self.order = sorted(range(prob.n_rows), key=lambda r: (-spread[r], r))
        self.excluded = set(prob.exclusions)

    def run(self, allowed: list[np.ndarray], must_use: frozenset[int] | None):
        p = self.p
        order = self.order
        n = len(order)
        # suffix sums of per-row minimum coupling coefficients over admissible columns
        cmin = [
            np.array([cp.coef[r][allowed[r]].min() for r in order] + [0.0])
            for cp in p.couplings
        ]
        suffix = [np.concatenate([np.cumsum(c[::-1][1:])[::-1], [0.0]]) for c in cmin]
        # per-row columns sorted by cost, ties by column index
        cols = [allowed[r][np.lexsort((allowed[r], p.costs[r][allowed[r]]))] for r in order]
        assign = [0] * p.n_rows
        used_k = [0.0] * len(p.couplings)

        def admissible(depth: int, used: list[float]) -> list[np.ndarray]:
            """Columns of each remaining row that fit the coupling slack."""
            out = []
            for d in range(depth, n):
                r = order[d]
                c = cols[d]
                ok = np.ones(len(c), dtype=bool)
                for k, cp in enumerate(p.couplings):
                    rest = suffix[k][depth] - cmin[k][d]  # min contribution of the other unassigned rows
                    ok &= used[k] + cp.coef[r][c] + rest <= cp.rhs + FEAS_TOL
                out.append(c[ok])
            return out

        def bound(adm: list[np.ndarray], depth: int) -> float:
            total = 0.0
            for d, c in enumerate(adm):
                if c.size == 0:
                    return math.inf
                total += p.costs[order[depth + d]][c[0]]  # c is cost-sorted
            return total

        def dfs(depth: int, cost: float, used_set: frozenset[int]):
            self.nodes += 1
            if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
                raise _Timeout
            if must_use is not None and len(must_use - used_set) > n - depth:
                return
            if depth == n:
                a = tuple(assign)
                if a in self.excluded:
                    return
                if cost < self.best_obj:
                    self.best_obj, self.best = cost, a
                return
            adm = admissible(depth, used_k)
            lb = cost + bound(adm, depth)
            if lb >= self.best_obj - self.gap_limit:
                return
            r = order[depth]
            for j in adm[0]:
                j = int(j)
                c_new = cost + p.costs[r][j]
                if c_new + bound(adm[1:], depth + 1) >= self.best_obj - self.gap_limit:
                    # columns are cost-sorted, so later ones cannot do better
                    break
                assign[r] = j
                for k, cp in enumerate(p.couplings):
                    used_k[k] += cp.coef[r][j]
                dfs(depth + 1, c_new, used_set | {j})
                for k, cp in enumerate(p.couplings):
                    used_k[k] -= cp.coef[r][j]

        dfs(0, 0.0, frozenset())


def _root_bound(prob: AssignmentIlp) -> float:
    return float(sum(c.min() for c in prob.costs))


def solve_assignment(
    problem: AssignmentIlp, gap_limit: float = 0.0, time_limit: float | None = None
) -> IlpSolution:
    """Exact branch-and-bound; with a cardinality layer the active column sets
    are enumerated in the outer loop."""
    if gap_limit < 0:
        raise DataError("gap_limit must be non-negative")
    deadline = time.monotonic() + time_limit if time_limit is not None else None
    search = _Search(problem, gap_limit, deadline)
    all_cols = [np.arange(len(c)) for c in problem.costs]
    if problem.n_clusters is None:
        subsets = [None]
    else:
        width = len(problem.costs[0])
        subsets = list(itertools.combinations(range(width), problem.n_clusters))
        # most promising subsets first: cheapest relaxed bound
        subsets.sort(key=lambda s: (sum(c[list(s)].min() for c in problem.costs), s))
    timed_out = False
    try:
        for s in subsets:
            if s is None:
                search.run(all_cols, None)
            else:
                if len(s) > problem.n_rows:
                    continue
                allowed = [np.array(s) for _ in problem.costs]
                lb = sum(c[list(s)].min() for c in problem.costs)
                if lb >= search.best_obj - gap_limit:
                    continue
                search.run(allowed, frozenset(s))
    except _Timeout:
        timed_out = True

    if search.best is None:
        status = IlpStatus.TIME_LIMIT if timed_out else IlpStatus.INFEASIBLE
        return IlpSolution(None, math.inf, status, math.inf, search.nodes)
    obj = problem.objective(search.best)
    if timed_out:
        gap = max(obj - _root_bound(problem), 0.0)
        status = IlpStatus.GAP_LIMIT
    elif gap_limit > 0:
        gap, status = gap_limit, IlpStatus.GAP_LIMIT
    else:
        gap, status = 0.0, IlpStatus.OPTIMAL
    return IlpSolution(search.best, obj, status, gap, search.nodes)


def brute_force_assignment(problem: AssignmentIlp) -> IlpSolution:
    """Exhaustive reference solver (small instances only)."""
    best, best_obj = None, math.inf
    for a in itertools.product(*(range(len(c)) for c in problem.costs)):
        if problem.is_feasible(a):
            v = problem.objective(a)
            if v < best_obj:
                best, best_obj = a, v
    if best is None:
        return IlpSolution(None, math.inf, IlpStatus.INFEASIBLE, math.inf)
    return IlpSolution(best, best_obj, IlpStatus.OPTIMAL, 0.0)


@dataclass(frozen=True)
class KnapsackItem:
    cost: int  # number of clusters; adds cost - 1 parameters
    value: float
    tag: object = None


def solve_knapsack(groups: Sequence[Sequence[KnapsackItem]], budget: int) -> list[int | None]:
    """Pick at most one item per group maximizing total value subject to
    sum(cost - 1) <= budget. Returns the chosen item index per group (None for
    no refinement). Ties prefer fewer added parameters, then earlier items."""
    if budget < 0:
        raise DataError("budget must be non-negative")
    for g in groups:
        for it in g:
            if it.cost < 1:
                raise DataError("item cost (cluster count) must be at least 1")
    B = int(budget)
    # state per budget used: (value, -added, choice tuple)
    NEG = (-math.inf, 0, ())
    dp = [NEG] * (B + 1)
    dp[0] = (0.0, 0, ())
    for g in groups:
        new = [NEG] * (B + 1)
        for b in range(B + 1):
            v, neg_added, choice = dp[b]
            if v == -math.inf:
                continue
            cand = (v, neg_added, choice + (None,))
            if _better(cand, new[b]):
                new[b] = cand
            for i, it in enumerate(g):
                added = it.cost - 1
                if it.value <= 0 or b + added > B:
                    continue
                cand = (v + it.value, neg_added - added, choice + (i,))
                if _better(cand, new[b + added]):
                    new[b + added] = cand
        dp = new
    best = max(dp, key=lambda s: (s[0], s[1]))
    # among equal (value, added), max() keeps the first, i.e. the smallest budget
    return list(best[2])


def _better(a, b) -> bool:
    return (a[0], a[1]) > (b[0], b[1])


def brute_force_knapsack(groups: Sequence[Sequence[KnapsackItem]], budget: int) -> float:
    best = 0.0
    for choice in itertools.product(*([None] + list(range(len(g))) for g in groups)):
        added = sum(groups[k][i].cost - 1 for k, i in enumerate(choice) if i is not None)
        if added <= budget:
            best = max(best, sum(groups[k][i].value for k, i in enumerate(choice) if i is not None))
    return best


__all__ = [
    "AssignmentIlp",
    "Coupling",
    "IlpSolution",
    "IlpStatus",
    "KnapsackItem",
    "brute_force_assignment",
    "brute_force_knapsack",
    "solve_assignment",
    "solve_knapsack",
]
