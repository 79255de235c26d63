"""
Least-squares objective, score and information matrices.

All quantities pool the observations of every session with equal weight,
so M = sum of m_i is the normaliser throughout.
"""

from typing import Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import trapezoid

from ..diffusion import BracCurve, ParamQ, SystemTemplate, g_matrix_series, tac_grad_series
from ..errors import DomainError
from ..matexp import Mat
from .models import Dataset, as_dataset

__all__ = [
    "residuals",
    "residual_jacobian",
    "objective",
    "score",
    "gamma_n",
    "psi_n",
    "sigma2_hat",
    "gamma_lebesgue",
]

QLike = Union[ParamQ, ArrayLike]


def as_param(q: QLike) -> ParamQ:
    return q if isinstance(q, ParamQ) else ParamQ.from_array(q)


def model_stack(template: SystemTemplate, data: Dataset, q: QLike) -> Tuple[np.ndarray, Mat, np.ndarray]:
    """
    Evaluate the model over every observation of every session.

    Returns:
        Tuple of (f, J, y): stacked outputs (M,), partials (M, 2) and observations (M,)
    """
    q = as_param(q)
    data = as_dataset(data)
    f_parts, j_parts = [], []
    for session in data.sessions:
        f, df1, df2 = tac_grad_series(template, q, session.brac, session.times)
        f_parts.append(f)
        j_parts.append(np.column_stack([df1, df2]))
    return np.concatenate(f_parts), np.vstack(j_parts), data.tac_values


def residuals(template: SystemTemplate, data: Dataset, q: QLike) -> np.ndarray:
    """Stacked residuals f(t_ij; q) - y_ij."""
    f, _, y = model_stack(template, data, q)
    return f - y


def residual_jacobian(template: SystemTemplate, data: Dataset, q: QLike) -> Mat:
    """M x 2 Jacobian of the residual vector with respect to (q1, q2)."""
    _, J, _ = model_stack(template, data, q)
    return J


def objective(template: SystemTemplate, data: Dataset, q: QLike) -> float:
    """
    Least-squares objective J_n(q) = (1/(2M)) * sum of squared residuals.

    Args:
        template: Known matrices
        data: Sessions sharing q
        q: Parameter (q2 > 0)

    Returns:
        Objective value
    """
    r = residuals(template, data, q)
    return float(r @ r) / (2.0 * r.size)


def score(template: SystemTemplate, data: Dataset, q: QLike) -> np.ndarray:
    """
    Gradient of the objective: (1/M) * sum of (f_ij - y_ij) * grad_q f_ij.

    Returns:
        Length-2 vector
    """
    f, J, y = model_stack(template, data, q)
    return J.T @ (f - y) / y.size


def gamma_n(template: SystemTemplate, data: Dataset, q: QLike) -> Mat:
    """
    Empirical Gamma matrix: (1/M) * sum over all observations of g_mu(t_ij).

    Since df/dq2 = f/q2, this is J^T J / M for the residual Jacobian J.
    """
    _, J, _ = model_stack(template, data, q)
    G = J.T @ J / J.shape[0]
    return 0.5 * (G + G.T)


def psi_n(template: SystemTemplate, data: Dataset, q0: QLike, sigma2: float) -> Mat:
    """
    Covariance of the score at the true parameter under iid N(0, sigma2) noise.

    Uses the outer-product form sigma2/M^2 * sum grad f grad f^T, so that
    M * psi_n = sigma2 * gamma_n.
    """
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be >= 0, got {sigma2}")
    data = as_dataset(data)
    return sigma2 * gamma_n(template, data, q0) / data.M


def sigma2_hat(template: SystemTemplate, data: Dataset, q_hat: QLike) -> float:
    """Residual variance estimate (1/M) * sum of squared residuals at q_hat."""
    r = residuals(template, data, q_hat)
    return float(r @ r) / r.size


def gamma_lebesgue(template: SystemTemplate, q0: QLike, mu: BracCurve, nodes: int = 10_000) -> Mat:
    """
    Gamma for equispaced sampling: (1/T) * integral of g_mu(u) over [0, T].

    Args:
        template: Known matrices
        q0: Parameter at which g_mu is evaluated
        mu: BrAC input
        nodes: Number of uniform trapezoid sub-intervals

    Returns:
        Symmetric 2 x 2 matrix
    """
    if nodes < 1:
        raise DomainError(f"nodes must be >= 1, got {nodes}")
    q0 = as_param(q0)
    u = np.linspace(0.0, mu.horizon_T, nodes + 1)
    G = trapezoid(g_matrix_series(template, q0, mu, u), u, axis=0) / mu.horizon_T
    return 0.5 * (G + G.T)
