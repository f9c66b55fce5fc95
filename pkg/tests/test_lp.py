import itertools
import math

import numpy as np
import pytest

from invbench.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram,
                         solve_lp)


def test_simple_bounded_max():
    lp = LinearProgram("toy")
    x = lp.add_var("x", low=0.0, obj=1.0)
    lp.add_constraint("cap", {x: 1.0}, "<=", 5.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(5.0)
    assert sol["x"] == pytest.approx(5.0)


def test_infeasible_signaled():
    lp = LinearProgram("empty")
    x = lp.add_var("x", low=0.0, obj=1.0)
    lp.add_constraint("neg", {x: 1.0}, "<=", -1.0)
    assert solve_lp(lp).status == INFEASIBLE


def test_unbounded_signaled():
    lp = LinearProgram("unbounded")
    lp.add_var("x", low=0.0, obj=1.0)
    assert solve_lp(lp).status == UNBOUNDED


def test_equality_and_ge_constraints():
    lp = LinearProgram("mix")
    x = lp.add_var("x", obj=1.0)
    y = lp.add_var("y", obj=1.0)
    lp.add_constraint("sum", {x: 1.0, y: 1.0}, "==", 10.0)
    lp.add_constraint("floor", {x: 1.0}, ">=", 3.0)
    lp.add_constraint("ceil", {y: 1.0}, "<=", 4.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(10.0)
    assert sol["y"] <= 4.0 + 1e-9


def _enumerate_vertices(c, a_ub, b_ub, lower, upper):
    """Brute-force LP oracle: evaluate the objective at every basic feasible
    point formed by n active constraints chosen among inequality rows and
    variable bounds."""
    n = len(c)
    rows = [(np.asarray(r, dtype=float), float(b)) for r, b in zip(a_ub, b_ub)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if math.isfinite(lower[i]):
            rows.append((-e.copy(), -lower[i]))
        if math.isfinite(upper[i]):
            rows.append((e.copy(), upper[i]))
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        a = np.array([rows[i][0] for i in combo])
        b = np.array([rows[i][1] for i in combo])
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        ok = all(r @ x <= bb + 1e-7 for r, bb in rows)
        ok = ok and all(lower[i] - 1e-7 <= x[i] <= upper[i] + 1e-7 for i in range(n))
        if ok:
            val = float(np.dot(c, x))
            if best is None or val > best:
                best = val
    return best


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(17)
    solved = 0
    for trial in range(60):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 5))
        c = rng.uniform(-2, 2, size=n)
        a_ub = rng.uniform(-1, 2, size=(m, n))
        b_ub = rng.uniform(0.5, 6, size=m)
        upper = rng.uniform(1, 8, size=n)
        lp = LinearProgram(f"rand{trial}")
        for i in range(n):
            lp.add_var(f"x{i}", low=0.0, high=float(upper[i]), obj=float(c[i]))
        for j in range(m):
            lp.add_constraint(f"c{j}", {i: float(a_ub[j, i]) for i in range(n)},
                              "<=", float(b_ub[j]))
        sol = solve_lp(lp)
        ref = _enumerate_vertices(c, a_ub, b_ub, [0.0] * n, list(upper))
        assert sol.status == OPTIMAL
        assert ref is not None
        assert sol.value == pytest.approx(ref, abs=1e-6)
        solved += 1
    assert solved == 60


def test_solver_determinism():
    lp_vals = []
    for _ in range(2):
        lp = LinearProgram("det")
        xs = [lp.add_var(f"x{i}", high=3.0, obj=1.0 + 0.1 * i) for i in range(6)]
        lp.add_constraint("budget", {x: 1.0 for x in xs}, "<=", 7.5)
        sol = solve_lp(lp)
        lp_vals.append((sol.value, tuple(sol.x)))
    assert lp_vals[0] == lp_vals[1]


def test_feasibility_tolerance_checked():
    lp = LinearProgram("resid")
    x = lp.add_var("x", obj=1.0, high=10.0)
    lp.add_constraint("c", {x: 1.0}, "<=", 2.0)
    sol = solve_lp(lp)
    assert sol.max_residual <= 1e-7


def test_lp_text_dump_sections():
    lp = LinearProgram("dumpcase")
    x = lp.add_var("ship", low=0.0, high=4.0, obj=2.5)
    lp.add_constraint("cap", {x: 1.0}, "<=", 3.0)
    text = lp.to_lp_text()
    assert "Maximize" in text
    assert "Subject To" in text
    assert "cap:" in text
    assert "ship" in text
    assert "Bounds" in text
    assert text.rstrip().endswith("End")
