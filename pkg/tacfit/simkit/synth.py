"""
Seeded synthesis of noisy TAC sessions.
"""

import numpy as np

from ..diffusion import BracCurve, ParamQ, SystemTemplate, realize, tac_series
from ..errors import DomainError
from ..mestim import Session

__all__ = ["DESIGNS", "make_rng", "replicate_seed", "synthesize"]

DESIGNS = ("uniform", "random")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one stream."""
    return np.random.Generator(np.random.Philox(seed))


def replicate_seed(master_seed: int, index: int) -> int:
    """Seed of replicate `index`, derived from the master seed by counter."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def synthesize(
    template: SystemTemplate,
    q0: ParamQ,
    mu: BracCurve,
    m: int,
    sigma: float,
    seed: int,
    design: str = "uniform",
) -> Session:
    """
    Noisy TAC observations y_j = f(t_j; q0) + eps_j, eps_j iid N(0, sigma^2).

    Args:
        template: Known matrices
        q0: True parameter
        mu: BrAC input on [0, T]
        m: Number of observations
        sigma: Noise standard deviation
        seed: Generator seed
        design: "uniform" for t_j = j T/m, "random" for sorted Uniform(0, T) times

    Returns:
        Session on mu's horizon
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if design not in DESIGNS:
        raise DomainError(f"design must be one of {DESIGNS}, got '{design}'")

    rng = make_rng(seed)
    T = mu.horizon_T
    if design == "uniform":
        times = T * np.arange(1, m + 1) / m
    else:
        times = np.sort(rng.uniform(0.0, T, size=m))

    f = tac_series(realize(template, q0), mu, times)
    noise = rng.standard_normal(m)
    return Session(horizon_T=T, times=times, tac_values=f + sigma * noise, brac=mu)
