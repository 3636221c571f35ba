"""Semi-smooth Newton with backtracking and a sparse direct linear solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    """A time step could not be completed; ``cause`` names the reason."""

    def __init__(self, cause: str, message: str = ""):
        super().__init__(f"{cause}: {message}" if message else cause)
        self.cause = cause


@dataclass
class NewtonConfig:
    tol: float = 1.0e-7
    max_iter: int = 20
    contraction: float = 0.5
    max_halvings: int = 12
    sufficient_decrease: float = 1.0e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")

    @property
    def min_step(self) -> float:
        return self.contraction ** self.max_halvings


@dataclass
class NewtonStats:
    iterations: int = 0
    residual: float = np.inf
    initial_residual: float = np.inf
    steps: list = field(default_factory=list)
    converged: bool = False
    contact_points: int = 0


def solve_linear(A, b) -> np.ndarray:
    """Direct sparse solve with a residual check.

    Raises ``NonConvergence("linear-solve")`` if the factorization fails or
    the result does not satisfy ``|Ax - b| <= 1e-10 (|A| |x| + |b|)``.
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(A)
        x = lu.solve(b)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence("linear-solve", str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise NonConvergence("linear-solve", "non-finite solution")
    normA = spla.norm(A, np.inf)
    res = np.linalg.norm(A @ x - b, np.inf)
    if res > 1e-10 * (normA * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)):
        raise NonConvergence("linear-solve", f"residual {res:.3e} too large")
    return x


def newton_solve(problem, x0: np.ndarray, config: NewtonConfig, label: str = ""):
    """Solve ``problem.residual(x) = 0`` starting from ``x0``.

    ``problem`` provides ``residual(x)`` and ``linearize(x) -> (r, J)``.
    Returns ``(x, stats)``; raises ``NonConvergence`` on failure.
    """
    x = np.array(x0, dtype=float)
    stats = NewtonStats()
    r = problem.residual(x)
    norm = float(np.linalg.norm(r))
    stats.initial_residual = stats.residual = norm
    if not np.isfinite(norm):
        raise NonConvergence("newton", "non-finite initial residual")
    while norm > config.tol:
        if stats.iterations >= config.max_iter:
            raise NonConvergence("newton", f"no convergence after {stats.iterations} iterations, |r|={norm:.3e}")
        r, J = problem.linearize(x)
        dx = solve_linear(J, -r)
        alpha = 1.0
        while True:
            trial = x + alpha * dx
            r_new = problem.residual(trial)
            n_new = float(np.linalg.norm(r_new))
            if np.isfinite(n_new) and n_new <= (1.0 - config.sufficient_decrease * alpha) * norm:
                break
            alpha *= config.contraction
            if alpha < config.min_step:
                raise NonConvergence("line-search", f"step length underflow at |r|={norm:.3e}")
        x, r, norm = trial, r_new, n_new
        stats.iterations += 1
        stats.steps.append(alpha)
        stats.residual = norm
        log.debug("%s newton it %d |r|=%.3e alpha=%.3g", label, stats.iterations, norm, alpha)
    stats.converged = True
    stats.contact_points = int(getattr(problem, "contact_active", 0))
    return x, stats


def fd_jacobian_check(problem, x: np.ndarray, n_directions: int = 10, rel_step: float = 1e-6,
                      seed: int = 0) -> float:
    """Max relative mismatch between ``J d`` and a central difference of the residual."""
    rng = np.random.default_rng(seed)
    _, J = problem.linearize(x)
    scale = max(np.linalg.norm(x), 1.0)
    tau = rel_step * scale
    worst = 0.0
    for _ in range(n_directions):
        d = rng.standard_normal(len(x))
        d /= np.linalg.norm(d)
        Jd = J @ d
        fd = (problem.residual(x + tau * d) - problem.residual(x - tau * d)) / (2 * tau)
        denom = max(np.linalg.norm(Jd), np.finfo(float).tiny)
        worst = max(worst, float(np.linalg.norm(fd - Jd) / denom))
    return worst
