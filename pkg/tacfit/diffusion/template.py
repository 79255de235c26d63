"""
Construction of the known matrices (D, E, F, C) and their realization at a given q.
"""

import numpy as np

from ..errors import DomainError
from .models import ParamQ, SystemRealization, SystemTemplate

__all__ = ["discretize_pde", "single_drink_template", "realize"]


def discretize_pde(k: int) -> SystemTemplate:
    """
    Discretize the skin-layer diffusion equation in depth.

    The layer eta in [0, 1] (0 = skin surface, 1 = blood side) carries k nodes
    with spacing h = 1/(k+1). Interior rows are the central second difference.
    The two boundary rows are flux balances over one cell:

        skin node:  dx_1/dt = q1 (x_2 - x_1)/h^2 - x_1/h        (q1 x_eta = x at eta=0)
        blood node: dx_k/dt = q1 (x_{k-1} - x_k)/h^2 + q2 mu/h  (q1 x_eta = q2 mu at eta=1)

    Every term that carries q1 goes into D, the q1-free outflow into E and the
    mu coefficient into F, so that A = q1 D + E and B = q2 F hold exactly.

    Args:
        k: Number of depth nodes (>= 2)

    Returns:
        SystemTemplate with C reading the skin node
    """
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k}")

    n = k + 1
    D = (np.diag(-2.0 * np.ones(k), k=0)
         + np.diag(np.ones(k - 1), k=-1)
         + np.diag(np.ones(k - 1), k=1))
    D[0, 0] = -1.0
    D[-1, -1] = -1.0
    D *= n * n

    E = np.zeros((k, k))
    E[0, 0] = -float(n)

    F = np.zeros((k, 1))
    F[-1, 0] = float(n)

    C = np.zeros((1, k))
    C[0, 0] = 1.0

    return SystemTemplate(k=k, D=D, E=E, F=F, C=C, label=f"pde(k={k})")


def single_drink_template() -> SystemTemplate:
    """Two-state template of the simulation protocol: D = I, E = 0, C = (1, 0), F = (1, 0)^T."""
    return SystemTemplate(
        k=2,
        D=np.eye(2),
        E=np.zeros((2, 2)),
        F=np.array([[1.0], [0.0]]),
        C=np.array([[1.0, 0.0]]),
        label="single_drink",
    )


def realize(template: SystemTemplate, q: ParamQ) -> SystemRealization:
    """
    Build A = q1 D + E and B = q2 F.

    Args:
        template: Known matrices
        q: Parameter in the admissible set (q2 > 0)

    Returns:
        SystemRealization
    """
    if not isinstance(q, ParamQ):
        q = ParamQ.from_array(q)
    A = q.q1 * template.D + template.E
    B = q.q2 * template.F
    return SystemRealization(A=A, B=B, C=np.array(template.C), q=q)
