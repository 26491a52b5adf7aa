import numpy as np
import pytest

from gridmin import grid_refine_min, random_box_row_qp
from swarmplan import qp


def box_qp(P, q, A, lower, upper):
    return qp.QpProblem(P, q, A, lower, upper)


class TestValidate:
    def test_well_formed(self):
        problem = box_qp(np.eye(2), [0.0, 0.0], np.eye(2), [-1, -1], [1, 1])
        assert qp.validate(problem) == []

    def test_bound_inversion(self):
        problem = box_qp(np.eye(1), [0.0], np.eye(1), [1.0], [-1.0])
        issues = qp.validate(problem)
        assert any(i.kind == "BoundInversion" and i.row == 0 for i in issues)

    def test_not_positive_semidefinite(self):
        problem = box_qp([[-1.0]], [0.0], np.eye(1), [-1.0], [1.0])
        issues = qp.validate(problem)
        assert any(i.kind == "NotPositiveSemidefinite" for i in issues)

    def test_dimension_mismatch(self):
        problem = box_qp(np.eye(2), [0.0, 0.0, 0.0], np.eye(2), [-1, -1], [1, 1])
        issues = qp.validate(problem)
        assert any(i.kind == "DimensionMismatch" for i in issues)

    def test_asymmetry(self):
        problem = box_qp([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0], np.eye(2), [-1, -1], [1, 1])
        issues = qp.validate(problem)
        assert any(i.kind == "AsymmetricP" for i in issues)

    def test_non_finite_cost(self):
        problem = box_qp(np.eye(1), [np.nan], np.eye(1), [-1.0], [1.0])
        issues = qp.validate(problem)
        assert any(i.kind == "NonFiniteEntry" for i in issues)

    def test_psd_with_zero_eigenvalue_passes(self):
        problem = box_qp([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0], np.eye(2), [-1, -1], [1, 1])
        assert qp.validate(problem) == []


class TestSolve:
    def test_variable_pinned_by_equality(self):
        # minimize (x-1)^2 encoded as 0.5*2x^2 - 2x, subject to x = 0
        problem = box_qp([[2.0]], [-2.0], [[1.0]], [0.0], [0.0])
        solution = qp.solve(problem)
        assert solution.status is qp.QpStatus.SOLVED
        assert solution.x[0] == pytest.approx(0.0, abs=1e-9)
        assert solution.objective == pytest.approx(0.0, abs=1e-9)

    def test_unconstrained_gradient_zero(self):
        problem = box_qp(np.eye(2), [-1.0, -1.0], None, None, None)
        solution = qp.solve(problem)
        assert solution.status is qp.QpStatus.SOLVED
        assert solution.x == pytest.approx([1.0, 1.0], abs=1e-8)

    def test_primal_infeasible_detected(self):
        problem = box_qp([[2.0]], [0.0], [[1.0], [1.0]], [-np.inf, 1.0], [0.0, np.inf])
        solution = qp.solve(problem)
        assert solution.status is qp.QpStatus.PRIMAL_INFEASIBLE

    def test_max_iterations_reports_residuals(self):
        rng = np.random.default_rng(1)
        P, q, A, lower, upper, _ = random_box_row_qp(rng)
        solution = qp.solve(qp.QpProblem(P, q, A, lower, upper), qp.QpSettings(max_iter=2, check_interval=1, polish=False))
        assert solution.status is qp.QpStatus.MAX_ITERATIONS
        assert np.isfinite(solution.primal_residual) and np.isfinite(solution.dual_residual)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            P, q, A, lower, upper, geo = random_box_row_qp(rng)
            problem = qp.QpProblem(P, q, A, lower, upper)
            assert qp.validate(problem) == []
            solution = qp.solve(problem)
            assert solution.status is qp.QpStatus.SOLVED
            box_lo, box_hi, a, row_lo, row_hi = geo
            oracle_f, _ = grid_refine_min(P, q, box_lo, box_hi, a, row_lo, row_hi)
            assert abs(solution.objective - oracle_f) <= 1e-5 * max(1.0, abs(oracle_f))

    def test_determinism(self):
        rng = np.random.default_rng(5)
        P, q, A, lower, upper, _ = random_box_row_qp(rng)
        problem = qp.QpProblem(P, q, A, lower, upper)
        s1 = qp.solve(problem)
        s2 = qp.solve(problem)
        assert np.array_equal(s1.x, s2.x)
        assert s1.iterations == s2.iterations


class TestKktResiduals:
    def test_solved_residuals_match_reported(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            P, q, A, lower, upper, _ = random_box_row_qp(rng)
            problem = qp.QpProblem(P, q, A, lower, upper)
            solution = qp.solve(problem)
            primal, dual = qp.kkt_residuals(problem, solution.x, solution.y)
            assert primal == pytest.approx(solution.primal_residual, abs=1e-12)
            assert dual == pytest.approx(solution.dual_residual, abs=1e-12)

    def test_bound_violation_measured(self):
        problem = box_qp(np.eye(1), [0.0], [[1.0]], [-1.0], [1.0])
        primal, _ = qp.kkt_residuals(problem, np.array([1.5]), np.array([0.0]))
        assert primal == pytest.approx(0.5)

    def test_hand_built_dual(self):
        problem = box_qp([[2.0]], [-2.0], [[1.0]], [-10.0], [10.0])
        _, dual = qp.kkt_residuals(problem, np.array([1.0]), np.array([0.0]))
        assert dual == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        problem = box_qp(np.eye(2), [0.0, 0.0], np.eye(2), [-1, -1], [1, 1])
        with pytest.raises(qp.QpDimensionError):
            qp.kkt_residuals(problem, np.zeros(3), np.zeros(2))
        with pytest.raises(qp.QpDimensionError):
            qp.kkt_residuals(problem, np.zeros(2), np.zeros(1))


class TestProperties:
    def test_solved_within_tolerance(self):
        rng = np.random.default_rng(29)
        settings = qp.QpSettings()
        for _ in range(10):
            P, q, A, lower, upper, _ = random_box_row_qp(rng)
            problem = qp.QpProblem(P, q, A, lower, upper)
            solution = qp.solve(problem, settings)
            assert solution.status is qp.QpStatus.SOLVED
            ax = A @ solution.x
            prim_scale = max(np.abs(ax).max(), np.abs(np.clip(ax, lower, upper)).max())
            dual_scale = max(
                np.abs(A.T @ solution.y).max(),
                np.abs(P @ solution.x).max(),
                np.abs(q).max(),
            )
            assert solution.primal_residual <= settings.eps_abs + settings.eps_rel * prim_scale
            assert solution.dual_residual <= settings.eps_abs + settings.eps_rel * dual_scale

    def test_warm_start_perturbation_same_argmin(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            P, q, A, lower, upper, _ = random_box_row_qp(rng)
            problem = qp.QpProblem(P, q, A, lower, upper)
            base = qp.solve(problem)
            perturbed = qp.solve(problem, x0=base.x + rng.normal(scale=0.3, size=len(q)))
            assert base.x == pytest.approx(perturbed.x, abs=1e-6)

    def test_cost_scaling_preserves_argmin(self):
        rng = np.random.default_rng(37)
        for c in (0.5, 3.0, 20.0):
            P, q, A, lower, upper, _ = random_box_row_qp(rng)
            s1 = qp.solve(qp.QpProblem(P, q, A, lower, upper))
            s2 = qp.solve(qp.QpProblem(c * P, c * q, A, lower, upper))
            assert s1.x == pytest.approx(s2.x, abs=1e-6)

    def test_solve_counter_increments(self):
        problem = box_qp(np.eye(1), [-1.0], [[1.0]], [-5.0], [5.0])
        before = qp.SOLVE_CALLS
        qp.solve(problem)
        assert qp.SOLVE_CALLS == before + 1
