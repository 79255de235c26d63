"""
Michaelis-Menten BrAC curves for simulation studies.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..diffusion import BracCurve
from ..errors import DomainError

__all__ = ["MMParams", "mm_concentration", "mm_brac"]


@dataclass(frozen=True)
class MMParams:
    """
    Drinking diary plus absorption and elimination kinetics.

    Each dose adds absorption_rate * dose_amount * pct_per_drink * exp(-absorption_rate (t - t_d))
    to dC/dt from its dose time t_d on; elimination is vmax * C / (km + C).

    Attributes:
        dose_times: Dose times in hours
        dose_amount: Standard drinks per dose
        absorption_rate: First-order absorption rate (1/h)
        vmax: Maximal elimination rate (%/h)
        km: Michaelis constant (%)
        pct_per_drink: BrAC reached by one fully absorbed standard drink with no elimination (%)
    """
    dose_times: Tuple[float, ...] = (0.1,)
    dose_amount: float = 1.0
    absorption_rate: float = 6.0
    vmax: float = 0.017
    km: float = 0.005
    pct_per_drink: float = 0.066

    def __post_init__(self):
        object.__setattr__(self, "dose_times", tuple(sorted(float(t) for t in self.dose_times)))
        if self.dose_amount < 0 or self.pct_per_drink < 0:
            raise DomainError("dose_amount and pct_per_drink must be >= 0")
        for name in ("absorption_rate", "vmax", "km"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if any(t < 0 for t in self.dose_times):
            raise DomainError(f"dose times must be >= 0, got {self.dose_times}")


def _rk4_step(params: MMParams, doses: np.ndarray, t: float, c: float, h: float) -> float:
    """One RK4 step over [t, t+h] with a fixed set of active doses."""
    gain = params.absorption_rate * params.dose_amount * params.pct_per_drink

    def rhs(s: float, x: float) -> float:
        absorbed = gain * np.sum(np.exp(-params.absorption_rate * (s - doses))) if doses.size else 0.0
        return absorbed - params.vmax * x / (params.km + x)

    k1 = rhs(t, c)
    k2 = rhs(t + h / 2, max(c + h * k1 / 2, 0.0))
    k3 = rhs(t + h / 2, max(c + h * k2 / 2, 0.0))
    k4 = rhs(t + h, max(c + h * k3, 0.0))
    return max(c + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6, 0.0)


def mm_concentration(params: MMParams, T: float, grid: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    BrAC trajectory on the uniform grid of `grid` steps over [0, T].

    Steps containing a dose time are split there, so the absorption jump is
    never inside an RK4 stage.

    Returns:
        Tuple of (node times, concentrations), each of length grid + 1
    """
    if T <= 0:
        raise DomainError(f"T must be > 0, got {T}")
    if grid < 10:
        raise DomainError(f"grid must be >= 10, got {grid}")
    if any(t > T for t in params.dose_times):
        raise DomainError(f"dose times must lie in [0, {T}], got {params.dose_times}")

    nodes = np.linspace(0.0, T, grid + 1)
    conc = np.zeros(grid + 1)
    dose_times = np.asarray(params.dose_times, dtype=np.float64)

    c = 0.0
    for i in range(grid):
        a, b = nodes[i], nodes[i + 1]
        cuts = [a] + [d for d in params.dose_times if a < d < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            active = dose_times[dose_times <= lo]
            c = _rk4_step(params, active, lo, c, hi - lo)
        conc[i + 1] = c
    return nodes, conc


def mm_brac(params: MMParams, T: float, grid: int = 300) -> BracCurve:
    """
    Piecewise-constant BrAC curve from Michaelis-Menten kinetics.

    Each of the `grid` uniform segments takes the mean of the trajectory at
    its two end nodes.

    Args:
        params: Diary and kinetics
        T: Horizon in hours
        grid: Number of RK4 steps and curve segments (>= 10)

    Returns:
        BracCurve with `grid` equal segments
    """
    _, conc = mm_concentration(params, T, grid)
    return BracCurve.uniform(T, 0.5 * (conc[:-1] + conc[1:]))
