import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import LinearConstraint, milp

from hullopt.errors import DataError
from hullopt.ilp import (
    AssignmentIlp,
    Coupling,
    IlpStatus,
    KnapsackItem,
    brute_force_assignment,
    brute_force_knapsack,
    solve_assignment,
    solve_knapsack,
)


def milp_oracle(p: AssignmentIlp) -> float:
    """Independent optimum from the HiGHS MILP solver on the explicit 0-1 model."""
    offs = np.cumsum([0] + [len(c) for c in p.costs])
    nx = offs[-1]
    width = len(p.costs[0]) if p.n_clusters is not None else 0
    n = nx + width
    c = np.concatenate(p.costs + [np.zeros(width)])
    rows, lo, hi = [], [], []

    def add(coef, l, h):
        rows.append(coef)
        lo.append(l)
        hi.append(h)

    for r in range(p.n_rows):
        a = np.zeros(n)
        a[offs[r] : offs[r + 1]] = 1
        add(a, 1, 1)
    for cp in p.couplings:
        add(np.concatenate(cp.coef + [np.zeros(width)]), -np.inf, cp.rhs)
    for e in p.exclusions:
        a = np.zeros(n)
        for r, j in enumerate(e):
            a[offs[r] + j] = 1
        add(a, -np.inf, p.n_rows - 1)
    if width:
        a = np.zeros(n)
        a[nx:] = 1
        add(a, p.n_clusters, p.n_clusters)
        for j in range(width):
            use = np.zeros(n)
            use[nx + j] = -1
            for r in range(p.n_rows):
                link = np.zeros(n)
                link[offs[r] + j] = 1
                link[nx + j] = -1
                add(link, -np.inf, 0)
                use[offs[r] + j] = 1
            add(use, 0, np.inf)
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi), integrality=np.ones(n),
               bounds=(0, 1))
    return res.fun if res.status == 0 else math.inf


# -- worked instances -----------------------------------------------------------------


def test_rounding_instance():
    vals = np.array([1.0, 2.0, 3.0])
    p = AssignmentIlp([(vals - 2) ** 2] * 2, exclusions=[(1, 1)])
    sol = solve_assignment(p)
    assert sol.status == IlpStatus.OPTIMAL and sol.gap == 0.0
    assert sol.objective == 1.0
    optimal = {a for a in itertools.product(range(3), repeat=2) if p.is_feasible(a) and p.objective(a) == 1.0}
    assert optimal == {(0, 1), (2, 1), (1, 0), (1, 2)}
    assert sol.assignment in optimal
    assert brute_force_assignment(p).objective == 1.0


def test_single_row_single_value():
    sol = solve_assignment(AssignmentIlp([[4.5]]))
    assert sol.assignment == (0,) and sol.objective == 4.5


def test_clustering_instance():
    # columns: value 5, value 10
    costs = [[9.0, 0.0], [0.0, 4.0], [0.0, 3.0]]
    p = AssignmentIlp(costs, n_clusters=2)
    sol = solve_assignment(p)
    assert sol.assignment == (1, 0, 0)
    assert sol.objective == brute_force_assignment(p).objective == 0.0


def test_infeasible_and_bad_input():
    p = AssignmentIlp([[1.0, 2.0]], couplings=[Coupling([[5.0, 6.0]], 1.0)])
    sol = solve_assignment(p)
    assert sol.status == IlpStatus.INFEASIBLE and sol.assignment is None
    with pytest.raises(DataError):
        AssignmentIlp([[]])
    with pytest.raises(DataError):
        AssignmentIlp([[1.0, np.nan]])
    with pytest.raises(DataError):
        AssignmentIlp([[1.0, 2.0]], couplings=[Coupling([[1.0]], 1.0)])
    with pytest.raises(DataError):
        AssignmentIlp([[1.0, 2.0]], n_clusters=3)
    with pytest.raises(DataError):
        solve_assignment(AssignmentIlp([[1.0]]), gap_limit=-1)


def test_lp_dump_lists_every_constraint():
    p = AssignmentIlp([[1.0, 2.0], [3.0, 4.0]], couplings=[Coupling([[1, 0], [0, 1]], 1.0)], n_clusters=1,
                      exclusions=[(0, 0)])
    text = p.to_lp_text()
    for tag in ("one_0:", "one_1:", "couple_0:", "card:", "excl_0:", "Binary", "End"):
        assert tag in text


# -- random instances --------------------------------------------------------------------


@st.composite
def instances(draw, max_vars=20):
    rows = draw(st.integers(1, 4))
    widths = draw(st.lists(st.integers(1, 5), min_size=rows, max_size=rows))
    cluster = draw(st.booleans())
    if cluster:
        w = draw(st.integers(1, 4))
        widths = [w] * rows
    if sum(widths) > max_vars:
        widths = [min(w, max_vars // rows) for w in widths]
    costs = [np.array(draw(st.lists(st.integers(-5, 9), min_size=w, max_size=w)), dtype=float) for w in widths]
    couplings = []
    for _ in range(draw(st.integers(0, 2))):
        coef = [np.array(draw(st.lists(st.integers(-3, 5), min_size=w, max_size=w)), dtype=float) for w in widths]
        couplings.append(Coupling(coef, float(draw(st.integers(-2, 8)))))
    exclusions = []
    if draw(st.booleans()):
        exclusions.append(tuple(draw(st.integers(0, w - 1)) for w in widths))
    n_clusters = draw(st.integers(1, widths[0])) if cluster else None
    return AssignmentIlp(costs, couplings, n_clusters, exclusions)


@settings(max_examples=150, deadline=None)
@given(instances())
def test_optimum_matches_enumeration(p):
    sol = solve_assignment(p)
    ref = brute_force_assignment(p)
    assert sol.objective == ref.objective
    if sol.feasible:
        assert sol.status == IlpStatus.OPTIMAL and sol.gap == 0.0
        assert p.is_feasible(sol.assignment, tol=0.0)
    else:
        assert sol.status == IlpStatus.INFEASIBLE


@settings(max_examples=60, deadline=None)
@given(instances())
def test_optimum_matches_milp_solver(p):
    assert solve_assignment(p).objective == pytest.approx(milp_oracle(p), abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(instances(), st.floats(0.5, 5.0))
def test_reported_gap_bounds_suboptimality(p, gap_limit):
    sol = solve_assignment(p, gap_limit=gap_limit)
    ref = brute_force_assignment(p)
    if sol.feasible:
        assert sol.objective - ref.objective <= sol.gap + 1e-12
        assert p.is_feasible(sol.assignment, tol=0.0)


def test_time_limit_returns_incumbent_with_gap():
    rng = np.random.default_rng(0)
    costs = [rng.random(8) for _ in range(14)]
    coef = [rng.random(8) for _ in range(14)]
    p = AssignmentIlp(costs, couplings=[Coupling(coef, 5.0)])
    sol = solve_assignment(p, time_limit=1e-4)
    assert sol.status in (IlpStatus.OPTIMAL, IlpStatus.GAP_LIMIT, IlpStatus.TIME_LIMIT)
    if sol.feasible:
        assert p.is_feasible(sol.assignment, tol=0.0)
        assert sol.objective - milp_oracle(p) <= sol.gap + 1e-9


# -- knapsack ---------------------------------------------------------------------------------


def test_knapsack_hand_example():
    groups = [[KnapsackItem(2, 10.0, "A")], [KnapsackItem(2, 7.0, "B")], [KnapsackItem(2, 6.0, "C")]]
    assert solve_knapsack(groups, 2) == [0, 0, None]


def test_knapsack_zero_budget_selects_nothing_that_adds_parameters():
    groups = [[KnapsackItem(2, 10.0)], [KnapsackItem(3, 7.0)]]
    assert solve_knapsack(groups, 0) == [None, None]


def test_negative_value_never_selected():
    assert solve_knapsack([[KnapsackItem(2, -1.0)]], 10) == [None]


def test_ties_prefer_fewer_added_parameters():
    groups = [[KnapsackItem(2, 5.0), KnapsackItem(4, 5.0)]]
    assert solve_knapsack(groups, 5) == [0]


def test_knapsack_rejects_bad_input():
    with pytest.raises(DataError):
        solve_knapsack([[KnapsackItem(0, 1.0)]], 1)
    with pytest.raises(DataError):
        solve_knapsack([], -1)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.lists(st.tuples(st.integers(1, 5), st.integers(-3, 20)), min_size=1, max_size=3),
                min_size=1, max_size=5), st.integers(0, 10))
def test_knapsack_matches_enumeration(raw, budget):
    groups = [[KnapsackItem(c, float(v)) for c, v in g] for g in raw]
    choice = solve_knapsack(groups, budget)
    assert len(choice) == len(groups)
    added = sum(groups[k][i].cost - 1 for k, i in enumerate(choice) if i is not None)
    value = sum(groups[k][i].value for k, i in enumerate(choice) if i is not None)
    assert added <= budget
    assert value == brute_force_knapsack(groups, budget)
