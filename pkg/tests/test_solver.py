import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cutfsi.solver import NewtonConfig, NonConvergence, fd_jacobian_check, newton_solve, solve_linear


class Quadratic:
    """r(x) = A x + c x^3 - b, a smooth monotone system with known Jacobian."""

    def __init__(self, n=6, c=0.5, seed=0, wrong_jacobian=False):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((n, n))
        self.A = M @ M.T + n * np.eye(n)
        self.c = c
        self.b = rng.standard_normal(n)
        self.wrong = wrong_jacobian

    def residual(self, x):
        return self.A @ x + self.c * x ** 3 - self.b

    def linearize(self, x):
        J = self.A + np.diag(3 * self.c * x ** 2)
        if self.wrong:
            J = J + np.diag(np.full(len(x), 5.0))
        return self.residual(x), sp.csr_matrix(J)


class Kink:
    """Semi-smooth scalar residual r(x) = x + 2 max(x - 1, 0) - 3 (root at 5/3)."""

    contact_active = 0

    def residual(self, x):
        return x + 2 * np.maximum(x - 1, 0) - 3

    def linearize(self, x):
        active = x > 1
        self.contact_active = int(active.sum())
        return self.residual(x), sp.csr_matrix(np.diag(1 + 2 * active.astype(float)))


def test_solve_linear_roundtrip():
    rng = np.random.default_rng(0)
    A = sp.random(40, 40, density=0.2, random_state=1) + 10 * sp.eye(40)
    x = rng.standard_normal(40)
    assert np.allclose(solve_linear(A, A @ x), x)


def test_solve_linear_singular_raises():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(NonConvergence) as exc:
        solve_linear(A, np.array([1.0, 0.0]))
    assert exc.value.cause == "linear-solve"


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_newton_converges_quadratically(seed):
    prob = Quadratic(seed=seed)
    x, stats = newton_solve(prob, np.zeros(6), NewtonConfig(tol=1e-12))
    assert stats.converged and stats.residual <= 1e-12
    assert np.linalg.norm(prob.residual(x)) <= 1e-12
    assert stats.iterations <= 8


def test_semismooth_newton_finds_kink_root_and_reports_active_set():
    prob = Kink()
    x, stats = newton_solve(prob, np.array([0.0]), NewtonConfig(tol=1e-12))
    assert x[0] == pytest.approx(5 / 3)
    assert stats.contact_points == 1


def test_zero_iterations_when_already_converged():
    prob = Quadratic()
    x0 = np.linalg.solve(prob.A, prob.b)
    x, _ = newton_solve(prob, x0, NewtonConfig(tol=1e-6))
    x, stats = newton_solve(prob, x, NewtonConfig(tol=1e-6))
    assert stats.iterations == 0


def test_iteration_budget_raises():
    with pytest.raises(NonConvergence) as exc:
        newton_solve(Quadratic(c=5.0), np.full(6, 10.0), NewtonConfig(tol=1e-14, max_iter=1))
    assert exc.value.cause == "newton"


def test_bad_jacobian_triggers_line_search_failure():
    class Flat(Quadratic):
        def linearize(self, x):
            r, J = super().linearize(x)
            return r, -J     # ascent direction: no step length decreases |r|

    with pytest.raises(NonConvergence) as exc:
        newton_solve(Flat(), np.zeros(6), NewtonConfig(tol=1e-10))
    assert exc.value.cause == "line-search"


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(contraction=1.5)


def test_fd_check_distinguishes_right_and_wrong_jacobians():
    x = np.random.default_rng(3).standard_normal(6)
    assert fd_jacobian_check(Quadratic(), x) <= 1e-7
    assert fd_jacobian_check(Quadratic(wrong_jacobian=True), x) > 1e-2
