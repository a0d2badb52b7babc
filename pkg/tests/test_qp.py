import math

import numpy as np
import pytest

from linfsynth.errors import ConfigError, DomainViolation, Infeasible
from linfsynth.qp import (QpProblem, SolverSettings, barrier_objective, find_strictly_feasible,
                          newton_centering, solve_qp)
from oracles import bisect, projected_gradient


def box_problem(Q, q, lo, hi, A=None, b=None):
    n = q.size
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.concatenate([hi, -lo])
    return QpProblem(Q, q, G, h, A, b)


def test_barrier_objective_examples():
    p = QpProblem(np.zeros((1, 1)), np.zeros(1), np.ones((1, 1)), np.ones(1))
    assert barrier_objective(p, np.zeros(1), 1.0) == 0.0
    assert barrier_objective(p, np.array([1 - math.exp(-1)]), 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainViolation):
        barrier_objective(p, np.ones(1), 1.0)


def test_newton_centering_scalar():
    # min x^2/2 s.t. x <= 10 at gamma = 1: x + 1/(10 - x) = 0
    p = QpProblem(np.eye(1), np.zeros(1), np.ones((1, 1)), np.array([10.0]))
    x = newton_centering(p, np.array([3.0]), 1.0)
    ref = bisect(lambda t: t + 1.0 / (10.0 - t), -5.0, 5.0)
    assert x[0] == pytest.approx(ref, abs=1e-9)
    assert ref == pytest.approx(5 - math.sqrt(26), abs=1e-12)


def test_newton_centering_fixed_point():
    p = QpProblem(np.eye(1), np.zeros(1), np.ones((1, 1)), np.array([10.0]))
    x_star = np.array([5 - math.sqrt(26)])
    assert np.array_equal(newton_centering(p, x_star, 1.0), x_star)


def test_inactive_constraints_limit(rng):
    M = rng.standard_normal((4, 4))
    Q = M @ M.T + np.eye(4)
    q = rng.standard_normal(4)
    x_free = -np.linalg.solve(Q, q)
    bound = 10 * (1 + np.abs(x_free).max())
    sol = solve_qp(box_problem(Q, q, -np.full(4, bound), np.full(4, bound)))
    assert np.allclose(sol.x, x_free, atol=1e-6)


def test_clipped_scalar():
    p = QpProblem(np.eye(1), np.array([-1.0]), np.ones((1, 1)), np.array([0.5]))
    sol = solve_qp(p)
    assert sol.optimal
    assert sol.x[0] == pytest.approx(0.5, abs=1e-7)
    assert sol.objective == pytest.approx(-0.375, abs=1e-8)


def test_equality_symmetric():
    p = QpProblem(np.eye(3), np.zeros(3), A=np.ones((1, 3)), b=np.ones(1))
    assert np.allclose(solve_qp(p).x, 1 / 3, atol=1e-10)


def test_feasible_start_box():
    p = box_problem(np.eye(3), np.zeros(3), -np.ones(3), np.ones(3))
    assert np.array_equal(find_strictly_feasible(p), np.zeros(3))


def test_phase_one_finds_interior():
    p = box_problem(np.eye(2), np.zeros(2), np.array([2.0, 3.0]), np.array([2.5, 4.0]))
    x = find_strictly_feasible(p)
    assert np.all(p.G @ x < p.h - 1e-6 * (1 + np.abs(p.h).max()))


def test_infeasible_rows():
    p = QpProblem(np.eye(1), np.zeros(1), np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    with pytest.raises(Infeasible):
        solve_qp(p)


def test_settings_validation():
    with pytest.raises(ConfigError):
        SolverSettings(mu=1.0)
    with pytest.raises(ConfigError):
        SolverSettings(ls_alpha=0.6)


def test_small_box_matches_projected_gradient(rng):
    M = rng.standard_normal((6, 6))
    Q = M @ M.T + 0.5 * np.eye(6)
    q = rng.standard_normal(6) * 5
    lo, hi = -np.ones(6), np.ones(6)
    sol = solve_qp(box_problem(Q, q, lo, hi))
    assert np.max(np.abs(sol.x - projected_gradient(Q, q, lo, hi))) <= 1e-5


def _random_instance(rng, n):
    M = rng.standard_normal((n, n))
    Q = M @ M.T / n + 0.1 * np.eye(n)
    q = rng.standard_normal(n) * 3
    return Q, q, -rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, n)


def test_certificate_against_random_feasible_points(rng):
    Q, q, lo, hi = _random_instance(rng, 8)
    p = box_problem(Q, q, lo, hi)
    sol = solve_qp(p)
    f = sol.objective
    for _ in range(100):
        z = rng.uniform(lo, hi)
        fz = p.objective(z)
        assert f <= fz + 1e-6 * (1 + abs(fz))


def test_primal_feasibility_and_gap(rng):
    Q, q, lo, hi = _random_instance(rng, 10)
    a = rng.uniform(0.5, 1.5, 10)
    b = np.array([a @ (0.3 * rng.uniform(lo, hi))])
    p = box_problem(Q, q, lo, hi, a[None, :], b)
    sol = solve_qp(p)
    assert sol.optimal and sol.gap_bound <= 1e-8
    assert np.all(p.G @ sol.x <= p.h + 1e-8 * (1 + np.abs(p.h).max()))
    assert np.max(np.abs(p.A @ sol.x - p.b)) <= 1e-8 * (1 + np.abs(b).max())


def test_gap_bound_analytic():
    # min 1/2 ||x - 2||^2 over x <= 1: optimum at x = 1, value n/2
    n = 5
    p = QpProblem(np.eye(n), -2 * np.ones(n), np.eye(n), np.ones(n))
    sol = solve_qp(p)
    true = p.objective(np.ones(n))
    assert 0 <= sol.objective - true <= sol.gap_bound + 1e-12


def test_outer_loop_monotone(rng):
    Q, q, lo, hi = _random_instance(rng, 12)
    hist = np.array(solve_qp(box_problem(Q, q, lo, hi)).history)
    assert np.all(np.diff(hist) <= 1e-9)


def test_deterministic(rng):
    Q, q, lo, hi = _random_instance(rng, 9)
    a = solve_qp(box_problem(Q, q, lo, hi))
    b = solve_qp(box_problem(Q.copy(), q.copy(), lo.copy(), hi.copy()))
    assert np.array_equal(a.x, b.x) and a.newton_iters == b.newton_iters


def test_q_symmetrized():
    Q = np.array([[2.0, 1.0], [0.0, 2.0]])
    p = QpProblem(Q, np.zeros(2), np.eye(2), np.ones(2))
    assert np.array_equal(p.Q, p.Q.T)
