"""
Run configuration and report models.
"""

from .models import (
    RunConfig,
    TemplateOverride,
    MMConfig,
    EllipseModel,
    FitReport,
    McRow,
    McTableReport,
    GammaReport,
    matrix,
)
from .loader import load_config, save_config, format_validation_error, ConfigLoadError

__all__ = [
    'RunConfig',
    'TemplateOverride',
    'MMConfig',
    'EllipseModel',
    'FitReport',
    'McRow',
    'McTableReport',
    'GammaReport',
    'matrix',
    'load_config',
    'save_config',
    'format_validation_error',
    'ConfigLoadError',
]
