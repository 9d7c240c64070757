import numpy as np
import pytest

from topt.fixedpoint import (LineSearchFailure, LineSearchState, StopCriteria, armijo_search, q_map, residual,
                             rpgd_solve, search_direction, stopping_check)
from topt.grid import GridSpec
from topt.models import ObjectiveValue, ProblemSpec, ReducedProblem
from topt.data import make_sinusoidal
from topt.report import Status


def quadratic(center):
    """f(x) = 0.5 ||x - center||^2 as an ObjectiveValue-returning callable."""
    return lambda x: ObjectiveValue(0.5 * float(np.sum((x - center) ** 2)), 0.0)


class TestArmijo:
    def test_backtracks_from_stored_step(self):
        # minimum at rho = 1 along s = 1; rho = 4 and 2 fail Armijo, 1 passes
        f = quadratic(np.array([1.0]))
        ls = LineSearchState(rho=4.0)
        x0 = np.zeros(1)
        rho, obj, x = armijo_search(f, x0, np.ones(1), -1.0, f(x0), ls)
        assert rho == 1.0 and ls.rho == 1.0
        assert x[0] == 1.0 and obj.total == 0.0

    def test_first_trial_success_doubles(self):
        f = quadratic(np.array([1.0]))
        ls = LineSearchState(rho=0.5)
        armijo_search(f, np.zeros(1), np.ones(1), -1.0, f(np.zeros(1)), ls)
        assert ls.rho == 1.0

    def test_exhaustion(self):
        f = lambda x: ObjectiveValue(float(np.sum(x**2)) + 1.0, 0.0)
        with pytest.raises(LineSearchFailure):
            armijo_search(f, np.zeros(1), np.ones(1), -1.0, ObjectiveValue(1.0, 0.0), LineSearchState(max_halvings=5))

    def test_rejects_ascent(self):
        f = quadratic(np.zeros(1))
        with pytest.raises(ValueError):
            armijo_search(f, np.zeros(1), np.ones(1), 0.0, f(np.zeros(1)), LineSearchState())

    def test_state_validation(self):
        with pytest.raises(ValueError):
            LineSearchState(rho=0.0)
        with pytest.raises(ValueError):
            StopCriteria(eps_rel=0.0)


class TestStopping:
    def test_zero_gradient(self):
        assert stopping_check(np.zeros(3), np.ones(3), 1, StopCriteria())

    def test_cap(self):
        assert stopping_check(np.ones(3), np.ones(3), 200, StopCriteria(n_iter=200))

    def test_not_yet(self):
        assert not stopping_check(np.full(3, 0.06), np.ones(3), 3, StopCriteria(eps_rel=5e-2))


class TestMap:
    def test_search_direction_is_preconditioned_descent(self, sinus_problem):
        g, _ = sinus_problem.gradient(sinus_problem.zeros())
        s = search_direction(g, sinus_problem.alpha, 2, sinus_problem.grid)
        np.testing.assert_allclose(s, -sinus_problem.precondition(g))
        assert sinus_problem.inner(g, s) < 0

    def test_q_decreases_objective(self, sinus_problem):
        v = sinus_problem.zeros()
        qv, g, rho = q_map(sinus_problem, v, LineSearchState())
        assert rho > 0
        assert sinus_problem.objective(qv).total < sinus_problem.objective(v).total
        np.testing.assert_allclose(residual(v, qv), v - qv)

    def test_fixed_point_at_stationary(self, grid32):
        m0, _ = make_sinusoidal(32)
        prob = ReducedProblem(ProblemSpec("advection", 1.0, m0, m0, grid32))
        v = prob.zeros()
        qv, _, _ = q_map(prob, v, LineSearchState())
        assert np.array_equal(qv, v)


class TestRPGD:
    def test_matched_images(self, grid32):
        m0, _ = make_sinusoidal(32)
        v, rep = rpgd_solve(ReducedProblem(ProblemSpec("advection", 1e-2, m0, m0, grid32)))
        assert rep.iters == 0 and rep.dist == 0 and rep.status is Status.CONVERGED
        assert not np.any(v)

    def test_monotone_objective(self, sinus_problem):
        _, rep = rpgd_solve(sinus_problem, StopCriteria(1e-2, 30))
        assert all(b < a for a, b in zip(rep.obj_history, rep.obj_history[1:]))
        assert rep.pdes >= rep.iters

    def test_itercap_status(self, sinus_problem):
        _, rep = rpgd_solve(sinus_problem, StopCriteria(1e-8, 3))
        assert rep.iters == 3 and rep.status is Status.ITERCAP and rep.grad > 1e-8
