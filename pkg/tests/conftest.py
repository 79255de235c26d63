import numpy as np
import pytest

from tacfit.diffusion import BracCurve, ParamQ, discretize_pde, single_drink_template
from tacfit.simkit import MMParams, mm_brac


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def single_drink():
    return single_drink_template()


@pytest.fixture
def pde4():
    return discretize_pde(4)


@pytest.fixture
def q0():
    return ParamQ(1.0, 1.0)


@pytest.fixture
def mm_curve():
    """Default single-dose Michaelis-Menten BrAC on [0, 1] with 60 segments."""
    return mm_brac(MMParams(), 1.0, grid=60)


@pytest.fixture
def hat_curve():
    """Rise-and-fall BrAC on [0, 2] with 20 segments."""
    levels = np.concatenate([np.linspace(0.0, 0.08, 8), np.linspace(0.07, 0.0, 12)])
    return BracCurve.uniform(2.0, levels)
