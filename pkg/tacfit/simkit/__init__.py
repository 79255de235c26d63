"""
Simulation harness: BrAC generation, TAC synthesis and Monte-Carlo studies.
"""

from .brac import MMParams, mm_concentration, mm_brac
from .synth import DESIGNS, make_rng, replicate_seed, synthesize
from .montecarlo import (
    MAX_FAILURE_FRACTION,
    ReplicateRecord,
    McReport,
    ScoreCltReport,
    SineStudy,
    monte_carlo,
    score_clt,
    sine_study,
)

__all__ = [
    'MMParams',
    'mm_concentration',
    'mm_brac',
    'DESIGNS',
    'make_rng',
    'replicate_seed',
    'synthesize',
    'MAX_FAILURE_FRACTION',
    'ReplicateRecord',
    'McReport',
    'ScoreCltReport',
    'SineStudy',
    'monte_carlo',
    'score_clt',
    'sine_study',
]
