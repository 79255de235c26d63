"""
Least-squares estimation of q and its asymptotic inference.
"""

from .models import (
    Session,
    Dataset,
    as_dataset,
    FitSettings,
    FitResult,
    ConfidenceEllipse,
    confidence_ellipse,
)
from .objective import (
    residuals,
    residual_jacobian,
    objective,
    score,
    gamma_n,
    psi_n,
    sigma2_hat,
    gamma_lebesgue,
)
from .fit import fit, covariance, covariance_from, projected_gradient
from .estimating import (
    EstimatingProblem,
    EstimatingSettings,
    solve_estimating_equation,
    diffusion_problem,
    sine_example,
    sine_example_gamma,
)

__all__ = [
    'Session',
    'Dataset',
    'as_dataset',
    'FitSettings',
    'FitResult',
    'ConfidenceEllipse',
    'confidence_ellipse',
    'residuals',
    'residual_jacobian',
    'objective',
    'score',
    'gamma_n',
    'psi_n',
    'sigma2_hat',
    'gamma_lebesgue',
    'fit',
    'covariance',
    'covariance_from',
    'projected_gradient',
    'EstimatingProblem',
    'EstimatingSettings',
    'solve_estimating_equation',
    'diffusion_problem',
    'sine_example',
    'sine_example_gamma',
]
