"""Two-phase simplex: worked examples, random feasibility, and strong duality."""

import itertools

import numpy as np
import pytest

from shapetest.linprog import (
    FEAS_TOL,
    LinearProgram,
    LpStatus,
    NumericalFailure,
    solve,
)


class TestBasics:
    def test_minimize_x_above_three(self):
        lp = LinearProgram.build(c=[1.0], a=[[1.0]], b=[3.0], senses=">=")
        sol = solve(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(3.0)
        assert sol.x[0] == pytest.approx(3.0)

    def test_unbounded(self):
        lp = LinearProgram.build(c=[-1.0], a=[[1.0]], b=[0.0], senses=">=")
        assert solve(lp).status is LpStatus.UNBOUNDED

    def test_infeasible(self):
        lp = LinearProgram.build(
            c=[0.0], a=[[1.0], [1.0]], b=[2.0, 1.0], senses=[">=", "<="]
        )
        assert solve(lp).status is LpStatus.INFEASIBLE

    def test_chebyshev_fit_of_monotone_pair(self):
        # best sup-norm fit of (1, 0) by a nondecreasing 2-vector
        # variables (h1, h2, t): |h_j - y_j| <= t, h2 >= h1
        a = [
            [-1.0, 0.0, -1.0],
            [1.0, 0.0, -1.0],
            [0.0, -1.0, -1.0],
            [0.0, 1.0, -1.0],
            [-1.0, 1.0, 0.0],
        ]
        b = [-1.0, 1.0, 0.0, 0.0, 0.0]
        senses = ["<="] * 4 + [">="]
        lp = LinearProgram.build(
            [0.0, 0.0, 1.0], a, b, senses, lower=[-np.inf, -np.inf, 0.0]
        )
        sol = solve(lp)
        assert sol.objective_value == pytest.approx(0.5, abs=1e-9)
        # brute-force oracle over monotone pairs on a fine grid
        grid = np.linspace(-1.0, 2.0, 301)
        best = min(
            max(abs(h1 - 1.0), abs(h2 - 0.0))
            for h1, h2 in itertools.product(grid, grid)
            if h1 <= h2
        )
        assert sol.objective_value == pytest.approx(best, abs=1e-2)

    def test_equality_rows(self):
        lp = LinearProgram.build(
            c=[1.0, 2.0],
            a=[[1.0, 1.0]],
            b=[1.0],
            senses="=",
        )
        sol = solve(lp)
        assert sol.status is LpStatus.OPTIMAL
        np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-9)

    def test_bounds_with_upper(self):
        lp = LinearProgram.build(c=[-1.0], a=[[1.0]], b=[10.0], senses="<=", upper=2.0)
        sol = solve(lp)
        assert sol.x[0] == pytest.approx(2.0)

    def test_negative_variables_via_bounds(self):
        lp = LinearProgram.build(
            c=[1.0], a=[[1.0]], b=[-5.0], senses=">=", lower=-np.inf
        )
        sol = solve(lp)
        assert sol.objective_value == pytest.approx(-5.0)

    def test_rejects_nonfinite_input(self):
        with pytest.raises(ValueError):
            LinearProgram.build(c=[np.inf], a=[[1.0]], b=[0.0])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((8, 5))
        b = a @ np.abs(rng.standard_normal(5)) + 0.5
        c = np.abs(rng.standard_normal(5))
        lp = LinearProgram.build(c, a, b, "<=")
        s1, s2 = solve(lp), solve(lp)
        assert s1.objective_value == s2.objective_value
        np.testing.assert_array_equal(s1.x, s2.x)


def random_bounded_feasible(rng, m, n):
    """min c'x s.t. A x >= b, x >= 0 with c > 0: feasible by construction, bounded below."""
    a = rng.standard_normal((m, n))
    x0 = np.abs(rng.standard_normal(n))
    b = a @ x0 - np.abs(rng.standard_normal(m))
    c = np.abs(rng.standard_normal(n)) + 0.1
    return c, a, b


class TestRandomPrograms:
    def test_feasibility_of_reported_optima(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m, n = rng.integers(2, 12, size=2)
            c, a, b = random_bounded_feasible(rng, int(m), int(n))
            sol = solve(LinearProgram.build(c, a, b, ">="))
            assert sol.status is LpStatus.OPTIMAL
            scale = 1.0 + np.max(np.abs(b))
            assert np.all(a @ sol.x - b >= -FEAS_TOL * scale)
            assert np.all(sol.x >= -FEAS_TOL * scale)

    def test_duality_gap(self):
        # dual of min c'x s.t. Ax >= b, x >= 0 is max b'y s.t. A'y <= c, y >= 0,
        # solved with the same simplex on the transposed program
        rng = np.random.default_rng(11)
        for _ in range(200):
            m, n = rng.integers(2, 10, size=2)
            c, a, b = random_bounded_feasible(rng, int(m), int(n))
            primal = solve(LinearProgram.build(c, a, b, ">="))
            dual = solve(LinearProgram.build(-b, a.T, c, "<="))
            assert primal.status is LpStatus.OPTIMAL
            assert dual.status is LpStatus.OPTIMAL
            gap = primal.objective_value - (-dual.objective_value)
            assert abs(gap) <= 1e-6 * (1.0 + abs(primal.objective_value))

    def test_degenerate_cycling_guard(self):
        # classic Beale cycling example; Bland fallback must terminate it
        c = [-0.75, 150.0, -0.02, 6.0]
        a = [
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
        b = [0.0, 0.0, 1.0]
        sol = solve(LinearProgram.build(c, a, b, "<="))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(-0.05, abs=1e-9)

    def test_iteration_cap_raises(self):
        import shapetest.linprog as L

        # x_i >= 1 for five variables forces at least five phase-1 pivots
        lp = LinearProgram.build(np.ones(5), np.eye(5), np.ones(5), ">=")

        def tiny_cap_solve(lp):
            work = L._Standardized(lp)
            tableau, basis, art_cols = work.tableau()
            L._set_phase1_costs(tableau, basis, art_cols)
            return L._run_simplex(
                tableau, basis, tableau.shape[1] - 1, art_cols, 1, 0, phase=1
            )

        with pytest.raises(NumericalFailure):
            tiny_cap_solve(lp)
