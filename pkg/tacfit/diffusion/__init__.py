"""
Skin-diffusion forward model: system matrices, BrAC inputs and the TAC output map.
"""

from .models import (
    ParamQ,
    SystemTemplate,
    SystemRealization,
    BracCurve,
    TacGradient,
)
from .template import discretize_pde, single_drink_template, realize
from .forward import (
    tac,
    tac_series,
    tac_grad,
    tac_grad_series,
    g_matrix,
    g_matrix_series,
)

__all__ = [
    'ParamQ',
    'SystemTemplate',
    'SystemRealization',
    'BracCurve',
    'TacGradient',
    'discretize_pde',
    'single_drink_template',
    'realize',
    'tac',
    'tac_series',
    'tac_grad',
    'tac_grad_series',
    'g_matrix',
    'g_matrix_series',
]
