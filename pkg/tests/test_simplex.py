import numpy as np
import pytest
from scipy.optimize import linprog

from evplan.milp import CONTINUOUS, MilpModel
from evplan.simplex import solve_lp


def _model(c, A, senses, b, lb, ub):
    m = MilpModel()
    for j, cj in enumerate(c):
        m.add_column(f"x{j}", CONTINUOUS, lb[j], ub[j], obj=cj)
    for i, row in enumerate(A):
        m.add_row(f"r{i}", [(j, a) for j, a in enumerate(row) if a != 0.0], senses[i], b[i])
    return m.freeze()


def test_min_x_subject_to_x_ge_3():
    m = _model([1.0], [[1.0]], ["G"], [3.0], [0.0], [np.inf])
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0)


def test_contradictory_rows_infeasible():
    m = _model([0.0], [[1.0], [1.0]], ["L", "G"], [0.0, 1.0], [-np.inf], [np.inf])
    assert solve_lp(m).status == "infeasible"


def test_unbounded():
    m = _model([-1.0], [[1.0]], ["G"], [0.0], [0.0], [np.inf])
    assert solve_lp(m).status == "unbounded"


def test_bound_flip_path():
    # Optimum sits at the upper bounds without any pivot.
    m = _model([-1.0, -1.0], [[1.0, 1.0]], ["L"], [5.0], [0.0, 0.0], [1.0, 1.0])
    res = solve_lp(m)
    assert res.objective == pytest.approx(-2.0)


def test_equality_handling():
    m = _model([1.0, 1.0], [[1.0, 2.0]], ["E"], [4.0], [0.0, 0.0], [3.0, 3.0])
    res = solve_lp(m)
    assert res.objective == pytest.approx(2.0)
    assert res.x[1] == pytest.approx(2.0)


def test_deterministic_repetition():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(12, 18)) * (rng.random((12, 18)) < 0.4)
    b = A @ rng.random(18) + rng.random(12)
    c = rng.normal(size=18)
    m = _model(c, A, ["L"] * 12, b, [0.0] * 18, [1.0] * 18)
    r1 = solve_lp(m)
    r2 = solve_lp(m)
    assert r1.iterations == r2.iterations
    assert np.array_equal(r1.x, r2.x)


@pytest.mark.parametrize("trial", range(30))
def test_random_cross_check_against_linprog(trial):
    rng = np.random.default_rng(1000 + trial)
    mm, nn = int(rng.integers(4, 30)), int(rng.integers(4, 30))
    A = rng.normal(size=(mm, nn)) * (rng.random((mm, nn)) < 0.45)
    x0 = rng.random(nn)
    senses = rng.choice(["L", "G", "E"], size=mm, p=[0.5, 0.35, 0.15])
    b = A @ x0
    b += np.where(senses == "L", rng.random(mm), np.where(senses == "G", -rng.random(mm), 0.0))
    c = rng.normal(size=nn)
    m = _model(c, A, senses, b, [0.0] * nn, [1.0] * nn)
    mine = solve_lp(m)
    Aub, bub, Aeq, beq = [], [], [], []
    for i in range(mm):
        if senses[i] == "L":
            Aub.append(A[i]); bub.append(b[i])
        elif senses[i] == "G":
            Aub.append(-A[i]); bub.append(-b[i])
        else:
            Aeq.append(A[i]); beq.append(b[i])
    ref = linprog(
        c,
        A_ub=np.array(Aub) if Aub else None,
        b_ub=np.array(bub) if bub else None,
        A_eq=np.array(Aeq) if Aeq else None,
        b_eq=np.array(beq) if beq else None,
        bounds=[(0, 1)] * nn,
        method="highs",
    )
    assert ref.status == 0
    assert mine.status == "optimal"
    assert mine.objective == pytest.approx(ref.fun, abs=1e-6 * max(1, abs(ref.fun)))


def test_warm_start_matches_cold():
    rng = np.random.default_rng(77)
    nn, mm = 25, 18
    A = rng.normal(size=(mm, nn)) * (rng.random((mm, nn)) < 0.5)
    b = A @ rng.random(nn) + rng.random(mm)
    c = rng.normal(size=nn)
    m = _model(c, A, ["L"] * mm, b, [0.0] * nn, [1.0] * nn)
    cold = solve_lp(m)
    # Tighten one bound and re-solve warm vs cold.
    lb = m.lb.copy()
    ub = m.ub.copy()
    ub[3] = 0.0
    warm = solve_lp(m, lb=lb, ub=ub, warm_basis=cold.basis)
    cold2 = solve_lp(m, lb=lb, ub=ub)
    assert warm.status == cold2.status == "optimal"
    assert warm.objective == pytest.approx(cold2.objective, abs=1e-8)
    assert warm.iterations <= cold2.iterations


def test_reduced_costs_signs():
    m = _model([2.0, -3.0], [[1.0, 1.0]], ["L"], [10.0], [0.0, 0.0], [4.0, 4.0])
    res = solve_lp(m)
    # x0 at lower bound: reduced cost >= 0; x1 at upper: <= 0.
    assert res.reduced_costs[0] >= -1e-9
    assert res.reduced_costs[1] <= 1e-9
