"""
Exact evaluation of the TAC output f(t; q) and its q-partials on
piecewise-constant BrAC inputs.

The state is propagated segment by segment with matexp.conv_step, so the only
approximation is the one inside the matrix exponential.
"""

from typing import Dict, Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..errors import DomainError
from ..matexp import Mat, build_block, conv_step
from .models import BracCurve, ParamQ, SystemRealization, SystemTemplate, TacGradient
from .template import realize

__all__ = [
    "tac",
    "tac_series",
    "tac_grad",
    "tac_grad_series",
    "g_matrix",
    "g_matrix_series",
]

# Relative slack for times that land a rounding error past the horizon
_HORIZON_SLACK = 1e-12

# Step lengths equal to this many decimals share one propagator
_DT_DIGITS = 13


def _check_times(mu: BracCurve, times: ArrayLike) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))
    T = mu.horizon_T
    if not np.all(np.isfinite(t)):
        raise DomainError("observation times must be finite")
    if np.any(t < 0) or np.any(t > T * (1 + _HORIZON_SLACK)):
        raise DomainError(f"observation times must lie in [0, {T}]")
    return np.minimum(t, T)


def _sweep(A: Mat, b: Mat, mu: BracCurve, times: np.ndarray) -> np.ndarray:
    """
    Propagate z' = A z + b mu(t), z(0) = 0, and return z at each requested time.

    Returns:
        Array of shape (len(times), dim), rows in the order of `times`
    """
    dim = A.shape[0]
    out = np.zeros((times.size, dim))
    if times.size == 0 or mu.is_zero:
        return out

    # Uniform grids produce segment lengths that differ only in the last bits
    cache: Dict[float, Tuple[Mat, Mat]] = {}

    def propagators(dt: float) -> Tuple[Mat, Mat]:
        key = round(dt, _DT_DIGITS)
        hit = cache.get(key)
        if hit is None:
            hit = conv_step(A, b, dt)
            cache[key] = hit
        return hit

    edges = mu.edges
    levels = mu.levels
    last = mu.n_segments - 1
    z = np.zeros(dim)
    clock = 0.0
    seg = 0

    for i in np.argsort(times, kind="stable"):
        target = times[i]
        while seg < last and edges[seg + 1] <= target:
            dt = edges[seg + 1] - clock
            if dt > 0:
                phi, psi = propagators(dt)
                z = phi @ z + psi[:, 0] * levels[seg]
            clock = edges[seg + 1]
            seg += 1
        dt = target - clock
        if dt > 0:
            phi, psi = propagators(dt)
            z = phi @ z + psi[:, 0] * levels[seg]
            clock = target
        out[i] = z
    return out


def tac_series(realization: SystemRealization, mu: BracCurve, times: ArrayLike) -> np.ndarray:
    """
    TAC output f(t; q) at many times in one causal sweep.

    Args:
        realization: System at the current q
        mu: BrAC input on [0, T]
        times: Observation times in [0, T], any order

    Returns:
        1-D array of outputs aligned with `times`
    """
    t = _check_times(mu, times)
    states = _sweep(realization.A, realization.B, mu, t)
    return states @ realization.C[0]


def tac(realization: SystemRealization, mu: BracCurve, t: float) -> float:
    """
    TAC output f(t; q) = integral over [0, t] of C e^{A(t-s)} B mu(s) ds.

    Args:
        realization: System at the current q
        mu: BrAC input on [0, T]
        t: Time in [0, T]

    Returns:
        f(t; q)
    """
    return float(tac_series(realization, mu, [t])[0])


def tac_grad_series(
    template: SystemTemplate,
    q: ParamQ,
    mu: BracCurve,
    times: ArrayLike,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    TAC output and its q-partials at many times.

    The sensitivity s = dx/dq1 obeys s' = A s + D x, so (s, x) evolves under
    the order-1 block matrix [[A, D], [0, A]] driven by the column (0, B).
    The q2-partial uses df/dq2 = f/q2, since q2 only multiplies the input.

    Returns:
        Tuple of (f, df_dq1, df_dq2) arrays aligned with `times`
    """
    t = _check_times(mu, times)
    real = realize(template, q)
    k = real.k

    block = build_block(real.A, template.D, 1)
    drive = np.vstack([np.zeros((k, 1)), real.B])
    states = _sweep(block, drive, mu, t)

    c = real.C[0]
    f = states[:, k:] @ c
    df1 = states[:, :k] @ c
    df2 = f / q.q2
    return f, df1, df2


def tac_grad(template: SystemTemplate, q: ParamQ, mu: BracCurve, t: float) -> TacGradient:
    """
    TAC output and its exact partials with respect to q1 and q2 at time t.

    Args:
        template: Known matrices
        q: Parameter (q2 > 0)
        mu: BrAC input on [0, T]
        t: Time in [0, T]

    Returns:
        TacGradient
    """
    f, df1, df2 = tac_grad_series(template, q, mu, [t])
    return TacGradient(f=float(f[0]), df_dq1=float(df1[0]), df_dq2=float(df2[0]))


def g_matrix_series(template: SystemTemplate, q0: ParamQ, mu: BracCurve, times: ArrayLike) -> np.ndarray:
    """
    Outer products of (df/dq1, f/q2) at each time.

    Returns:
        Array of shape (len(times), 2, 2)
    """
    f, df1, _ = tac_grad_series(template, q0, mu, times)
    v = np.stack([df1, f / q0.q2], axis=1)
    return v[:, :, None] * v[:, None, :]


def g_matrix(template: SystemTemplate, q0: ParamQ, mu: BracCurve, u: float) -> Mat:
    """
    Information integrand g_mu(u) at q0.

    [[ (df1)^2,      f df1 / q2 ],
     [ f df1 / q2,   f^2 / q2^2 ]]
    """
    return g_matrix_series(template, q0, mu, [u])[0]
