"""
Bounded least-squares fit of q with asymptotic covariance and confidence ellipse.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import least_squares

from ..diffusion import ParamQ, SystemTemplate
from ..errors import DomainError, IdentifiabilityError
from ..matexp import Mat
from .models import Dataset, FitResult, FitSettings, Session, as_dataset
from .objective import QLike, as_param, gamma_n, model_stack

log = logging.getLogger(__name__)

__all__ = ["fit", "covariance", "covariance_from", "projected_gradient"]


class _ResidualModel:
    """Residuals and Jacobian sharing one model evaluation per point."""

    def __init__(self, template: SystemTemplate, data: Dataset):
        self.template = template
        self.data = data
        self._x: Optional[np.ndarray] = None
        self._r: Optional[np.ndarray] = None
        self._J: Optional[Mat] = None

    def _evaluate(self, x: np.ndarray) -> None:
        if self._x is not None and np.array_equal(x, self._x):
            return
        f, J, y = model_stack(self.template, self.data, x)
        self._x = np.array(x, dtype=np.float64)
        self._r = f - y
        self._J = J

    def residuals(self, x: np.ndarray) -> np.ndarray:
        self._evaluate(x)
        return self._r

    def jacobian(self, x: np.ndarray) -> Mat:
        self._evaluate(x)
        return self._J


@dataclass
class _Attempt:
    x: np.ndarray
    objective: float
    score_norm: float  # projected onto the feasible set
    residuals: np.ndarray
    nfev: int
    status: int
    message: str


def projected_gradient(x: np.ndarray, grad: np.ndarray, lower_bounds: Sequence[float], bound_tol: float) -> np.ndarray:
    """
    Gradient with the components of active lower bounds removed.

    A component counts as active when x lies within bound_tol of its lower
    bound and the gradient there points into the bound (grad >= 0).
    """
    lb = np.asarray(lower_bounds, dtype=np.float64)
    active = (x - lb <= bound_tol) & (grad >= 0)
    return np.where(active, 0.0, grad)


def _run_start(model: _ResidualModel, x0: np.ndarray, settings: FitSettings) -> _Attempt:
    lb = np.asarray(settings.lower_bounds, dtype=np.float64)
    res = least_squares(
        model.residuals,
        np.maximum(x0, lb),
        jac=model.jacobian,
        bounds=(lb, np.inf),
        method="trf",
        x_scale=1.0,
        ftol=settings.ftol,
        xtol=settings.xtol,
        gtol=settings.gtol,
        max_nfev=settings.max_iter,
    )
    r = model.residuals(res.x)
    J = model.jacobian(res.x)
    M = r.size
    return _Attempt(
        x=np.array(res.x),
        objective=float(r @ r) / (2.0 * M),
        score_norm=float(np.linalg.norm(projected_gradient(res.x, J.T @ r / M, lb, settings.bound_tol))),
        residuals=np.array(r),
        nfev=int(res.nfev),
        status=int(res.status),
        message=str(res.message),
    )


def _multistart_points(settings: FitSettings) -> List[np.ndarray]:
    lo, hi = settings.multistart_range
    grid = np.geomspace(lo, hi, 4)[1:3]
    return [np.array(p) for p in itertools.product(grid, grid)]


def covariance_from(sigma2: float, gamma: Mat, M: int, max_condition: float = 1e12) -> Mat:
    """
    Asymptotic covariance sigma2 * gamma^{-1} / M.

    Raises:
        IdentifiabilityError: If gamma is singular or its condition number exceeds max_condition
    """
    if M < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    gamma = np.asarray(gamma, dtype=np.float64)
    cond = float(np.linalg.cond(gamma)) if np.any(gamma) else float("inf")
    if not np.isfinite(cond) or cond > max_condition:
        raise IdentifiabilityError(
            f"Gamma is not invertible (condition number {cond:.3g}); "
            "the BrAC data do not identify q (is the BrAC curve identically zero?)",
            condition_number=cond,
        )
    cov = sigma2 * np.linalg.inv(gamma) / M
    return 0.5 * (cov + cov.T)


def covariance(fit_result: FitResult, M: Optional[int] = None, max_condition: float = 1e12) -> Mat:
    """
    Covariance of q_hat: sigma2_hat * gamma_hat^{-1} / M.

    Args:
        fit_result: Result of `fit`
        M: Total observation count (defaults to the one the fit used)
        max_condition: Largest acceptable condition number of gamma_hat

    Returns:
        Symmetric 2 x 2 matrix
    """
    return covariance_from(
        fit_result.sigma2_hat,
        fit_result.gamma_hat,
        fit_result.M if M is None else M,
        max_condition,
    )


def fit(
    template: SystemTemplate,
    data: Union[Dataset, Session, Sequence[Session]],
    init: QLike = ParamQ(1.0, 1.0),
    settings: Optional[FitSettings] = None,
) -> FitResult:
    """
    Minimize the least-squares objective over q with a bounded trust-region
    Gauss-Newton scheme and the analytic residual Jacobian.

    Convergence means a positive optimizer status and a projected score norm
    within tol: score components pushing q against an active lower bound are
    dropped, so a minimum on the boundary counts as converged.

    When the first start does not converge, four further starts on a log grid
    are tried; the lowest objective wins and ties go to the smaller |q|.

    Args:
        template: Known matrices
        data: Sessions sharing q
        init: Starting point (q2 > 0)
        settings: Optimizer settings

    Returns:
        FitResult; cov_qhat is None when gamma_hat cannot be inverted
    """
    settings = settings or FitSettings()
    data = as_dataset(data)
    init = as_param(init)
    notes: List[str] = []

    if all(s.brac.is_zero for s in data.sessions) and np.any(data.tac_values != 0):
        msg = "BrAC is identically zero but TAC is not; the fit is ill-posed"
        log.warning(msg)
        notes.append(msg)

    model = _ResidualModel(template, data)
    attempts = [_run_start(model, init.as_array(), settings)]
    best = attempts[0]

    if not (best.status > 0 and best.score_norm <= settings.tol) and settings.multistart:
        log.warning(
            f"Fit from ({init.q1:g}, {init.q2:g}) did not converge (|score|={best.score_norm:.3g}); "
            "trying 4 more starts"
        )
        for x0 in _multistart_points(settings):
            attempts.append(_run_start(model, x0, settings))
        best = min(attempts, key=lambda a: (a.objective, float(np.linalg.norm(a.x))))

    converged = best.status > 0 and best.score_norm <= settings.tol
    if not converged:
        msg = f"Optimizer stopped without convergence: {best.message}"
        log.warning(msg)
        notes.append(msg)

    q_hat = ParamQ.from_array(best.x)
    M = data.M
    s2 = float(best.residuals @ best.residuals) / M
    gamma_hat = gamma_n(template, data, q_hat)
    cond = float(np.linalg.cond(gamma_hat)) if np.any(gamma_hat) else float("inf")

    try:
        cov = covariance_from(s2, gamma_hat, M, settings.max_condition)
    except IdentifiabilityError as e:
        log.warning(str(e))
        notes.append(str(e))
        cov = None

    log.info(
        f"q_hat=({q_hat.q1:.6g}, {q_hat.q2:.6g}) sigma2_hat={s2:.4g} "
        f"|score|={best.score_norm:.3g} starts={len(attempts)}"
    )

    return FitResult(
        q_hat=q_hat,
        sigma2_hat=s2,
        gamma_hat=gamma_hat,
        cov_qhat=cov,
        objective_value=best.objective,
        iterations=best.nfev,
        converged=converged,
        gradient_norm=best.score_norm,
        M=M,
        starts_tried=len(attempts),
        message=best.message,
        condition_number=cond,
        residuals=best.residuals,
        warnings=notes,
    )
