"""
Generic solver for estimating equations U_n(theta) = 0.

The least-squares fit is one instance (U_n is the gradient of the objective);
`sine_example` is a scalar least-squares problem with a closed-form Gamma.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad

from ..diffusion import SystemTemplate
from ..errors import ConvergenceError, DomainError
from ..matexp import Mat
from .models import Dataset, as_dataset
from .objective import score

log = logging.getLogger(__name__)

__all__ = [
    "EstimatingProblem",
    "EstimatingSettings",
    "solve_estimating_equation",
    "diffusion_problem",
    "sine_example",
    "sine_example_gamma",
]

ScoreFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], Mat]


@dataclass
class EstimatingProblem:
    """
    An estimating equation U_n(theta) = 0 in p unknowns.

    Attributes:
        p: Number of unknowns
        score: theta -> U_n(theta), a length-p vector
        jacobian: theta -> U_n'(theta) (p x p); central differences when None
        a_n: Scale with a_n * U_n'(theta_hat) -> Gamma
        label: Name used in log records
        metadata: Problem data kept for reporting
    """
    p: int
    score: ScoreFn
    jacobian: Optional[JacobianFn] = None
    a_n: float = 1.0
    label: str = "problem"
    metadata: Dict[str, Any] = field(default_factory=dict)
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.p < 1:
            raise DomainError(f"p must be positive, got {self.p}")

    def evaluate_score(self, theta: ArrayLike) -> np.ndarray:
        u = np.atleast_1d(np.asarray(self.score(np.asarray(theta, dtype=np.float64)), dtype=np.float64))
        if u.shape != (self.p,):
            raise DomainError(f"score returned shape {u.shape}, expected ({self.p},)")
        return u

    def finite_difference_jacobian(self, theta: ArrayLike) -> Mat:
        """Central-difference approximation of U_n'(theta), column by column."""
        theta = np.asarray(theta, dtype=np.float64)
        jac = np.empty((self.p, self.p))
        for j in range(self.p):
            h = self.fd_step * max(1.0, abs(theta[j]))
            step = np.zeros(self.p)
            step[j] = h
            jac[:, j] = (self.evaluate_score(theta + step) - self.evaluate_score(theta - step)) / (2.0 * h)
        return jac

    def evaluate_jacobian(self, theta: ArrayLike) -> Mat:
        if self.jacobian is None:
            return self.finite_difference_jacobian(theta)
        jac = np.atleast_2d(np.asarray(self.jacobian(np.asarray(theta, dtype=np.float64)), dtype=np.float64))
        if jac.shape != (self.p, self.p):
            raise DomainError(f"jacobian returned shape {jac.shape}, expected ({self.p}, {self.p})")
        return jac

    def jacobian_mismatch(self, points: Sequence[ArrayLike]) -> float:
        """Largest relative gap between the supplied Jacobian and finite differences over `points`."""
        worst = 0.0
        for theta in points:
            analytic = self.evaluate_jacobian(theta)
            numeric = self.finite_difference_jacobian(theta)
            scale = max(np.max(np.abs(numeric)), 1e-300)
            worst = max(worst, float(np.max(np.abs(analytic - numeric)) / scale))
        return worst


@dataclass(frozen=True)
class EstimatingSettings:
    """Newton settings for the generic solver."""
    tol: float = 1e-8
    xtol: float = 1e-10
    max_iter: int = 100
    max_halvings: int = 40
    max_condition: float = 1e14


def _safe_norm(problem: EstimatingProblem, theta: np.ndarray) -> float:
    try:
        u = problem.evaluate_score(theta)
    except (DomainError, FloatingPointError):
        return float("inf")
    n = float(np.linalg.norm(u))
    return n if np.isfinite(n) else float("inf")


def solve_estimating_equation(
    problem: EstimatingProblem,
    init: ArrayLike,
    settings: Optional[EstimatingSettings] = None,
) -> Tuple[np.ndarray, Mat]:
    """
    Find a root of U_n by Newton iteration with backtracking on |U_n|.

    An iterate is accepted once |U_n| <= tol and the Newton step from it is
    within xtol * (1 + |theta|); a small score alone can sit far from the root
    when U_n' is nearly singular.

    Args:
        problem: Score, Jacobian and scale
        init: Starting point
        settings: Solver settings

    Returns:
        Tuple of (theta_hat, gamma_hat) with gamma_hat = a_n * U_n'(theta_hat)

    Raises:
        ConvergenceError: If the Jacobian is singular at an iterate, the line
            search cannot reduce |U_n|, or the iteration cap is reached
    """
    settings = settings or EstimatingSettings()
    theta = np.atleast_1d(np.asarray(init, dtype=np.float64)).copy()
    if theta.shape != (problem.p,):
        raise DomainError(f"init has shape {theta.shape}, expected ({problem.p},)")

    u = problem.evaluate_score(theta)
    norm = float(np.linalg.norm(u))

    for iteration in range(settings.max_iter + 1):
        jac = problem.evaluate_jacobian(theta)
        if not np.all(np.isfinite(jac)) or not np.linalg.cond(jac) <= settings.max_condition:
            raise ConvergenceError(
                f"{problem.label}: Jacobian singular at iterate {iteration}",
                iterations=iteration,
                score_norm=norm,
            )
        step = np.linalg.solve(jac, -u)

        small_step = np.linalg.norm(step) <= settings.xtol * (1.0 + np.linalg.norm(theta))
        if norm <= settings.tol and small_step:
            log.debug(f"{problem.label}: converged after {iteration} Newton steps, |U|={norm:.3g}")
            return theta, problem.a_n * jac
        if iteration == settings.max_iter:
            break

        t = 1.0
        for _ in range(settings.max_halvings):
            trial = theta + t * step
            trial_norm = _safe_norm(problem, trial)
            if trial_norm < norm:
                break
            t *= 0.5
        else:
            if norm <= settings.tol:
                log.debug(f"{problem.label}: |U|={norm:.3g} cannot be reduced further; accepting")
                return theta, problem.a_n * jac
            raise ConvergenceError(
                f"{problem.label}: line search could not reduce |U| below {norm:.3g}",
                iterations=iteration,
                score_norm=norm,
            )

        theta = trial
        u = problem.evaluate_score(theta)
        norm = float(np.linalg.norm(u))

    raise ConvergenceError(
        f"{problem.label}: no root within {settings.max_iter} iterations (|U|={norm:.3g})",
        iterations=settings.max_iter,
        score_norm=norm,
    )


def diffusion_problem(template: SystemTemplate, data: Dataset) -> EstimatingProblem:
    """The least-squares score of the diffusion model as an estimating equation in q."""
    data = as_dataset(data)
    return EstimatingProblem(
        p=2,
        score=lambda q: score(template, data, q),
        label=f"diffusion[{template.label}]",
        metadata={"M": data.M},
    )


def sine_example(
    theta0: float = 1.5,
    n: int = 400,
    sigma: float = 0.1,
    rng: Optional[np.random.Generator] = None,
    x_max: float = 2.0,
) -> EstimatingProblem:
    """
    Scalar least squares with f(x, theta) = sin(theta x) and x ~ Uniform(0, x_max).

    U_n(theta) = (1/n) sum (sin(theta x_i) - y_i) x_i cos(theta x_i), whose
    derivative tends to gamma = E[(x cos(theta0 x))^2].
    """
    if n < 1 or sigma < 0 or x_max <= 0:
        raise DomainError(f"need n >= 1, sigma >= 0 and x_max > 0, got n={n}, sigma={sigma}, x_max={x_max}")
    rng = rng or np.random.Generator(np.random.Philox(0))
    x = rng.uniform(0.0, x_max, size=n)
    y = np.sin(theta0 * x) + sigma * rng.standard_normal(n)

    def u(theta: np.ndarray) -> np.ndarray:
        th = theta[0]
        return np.array([np.mean((np.sin(th * x) - y) * x * np.cos(th * x))])

    def du(theta: np.ndarray) -> Mat:
        th = theta[0]
        r = np.sin(th * x) - y
        return np.array([[np.mean((x * np.cos(th * x)) ** 2 - r * x * x * np.sin(th * x))]])

    return EstimatingProblem(
        p=1,
        score=u,
        jacobian=du,
        label="sine",
        metadata={"theta0": theta0, "n": n, "sigma": sigma, "x_max": x_max, "x": x, "y": y},
    )


def sine_example_gamma(theta0: float = 1.5, x_max: float = 2.0) -> float:
    """gamma = (1/x_max) * integral over [0, x_max] of (x cos(theta0 x))^2."""
    value, _ = quad(lambda x: (x * np.cos(theta0 * x)) ** 2, 0.0, x_max)
    return value / x_max
