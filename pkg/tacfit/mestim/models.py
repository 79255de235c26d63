"""
Data containers for least-squares estimation and inference.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.stats import chi2

from ..diffusion import BracCurve, ParamQ
from ..errors import DimensionError, DomainError
from ..matexp import Mat


@dataclass(frozen=True)
class Session:
    """One drinking episode: TAC observations plus the BrAC curve driving them."""
    horizon_T: float
    times: np.ndarray
    tac_values: np.ndarray
    brac: BracCurve

    def __post_init__(self):
        T = float(self.horizon_T)
        t = np.asarray(self.times, dtype=np.float64).ravel()
        y = np.asarray(self.tac_values, dtype=np.float64).ravel()
        if t.size < 1:
            raise DimensionError("a session needs at least one observation")
        if t.size != y.size:
            raise DimensionError(f"{t.size} times but {y.size} TAC values")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise DomainError("times and TAC values must be finite")
        if np.any(np.diff(t) < 0):
            raise DomainError("observation times must be ascending")
        if t[0] < 0 or t[-1] > T * (1 + 1e-12):
            raise DomainError(f"observation times must lie in [0, {T}]")
        if abs(self.brac.horizon_T - T) > 1e-12 * max(1.0, T):
            raise DomainError(f"BrAC horizon {self.brac.horizon_T} differs from session horizon {T}")
        object.__setattr__(self, "horizon_T", T)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "tac_values", y)

    @property
    def m(self) -> int:
        return int(self.times.size)

    def with_values(self, tac_values: ArrayLike) -> "Session":
        return Session(self.horizon_T, self.times, np.asarray(tac_values, dtype=np.float64), self.brac)


@dataclass(frozen=True)
class Dataset:
    """All sessions sharing one parameter q."""
    sessions: Tuple[Session, ...]

    def __post_init__(self):
        sessions = tuple(self.sessions)
        if not sessions:
            raise DimensionError("a dataset needs at least one session")
        object.__setattr__(self, "sessions", sessions)
        if self.M < 2:
            raise DimensionError(f"a dataset needs at least 2 observations, got {self.M}")

    @classmethod
    def of(cls, *sessions: Session) -> "Dataset":
        return cls(tuple(sessions))

    @property
    def M(self) -> int:
        return sum(s.m for s in self.sessions)

    @property
    def tac_values(self) -> np.ndarray:
        return np.concatenate([s.tac_values for s in self.sessions])

    def appended(self, session: Session) -> "Dataset":
        return Dataset(self.sessions + (session,))


def as_dataset(data: Union[Dataset, Session, Sequence[Session]]) -> Dataset:
    """Accept a Dataset, a single Session or a list of sessions."""
    if isinstance(data, Dataset):
        return data
    if isinstance(data, Session):
        return Dataset((data,))
    return Dataset(tuple(data))


@dataclass(frozen=True)
class FitSettings:
    """Optimizer settings for the least-squares fit."""
    tol: float = 1e-8
    max_iter: int = 200
    lower_bounds: Tuple[float, float] = (1e-8, 1e-8)
    multistart: bool = True
    multistart_range: Tuple[float, float] = (0.1, 10.0)
    max_condition: float = 1e12
    ftol: float = 1e-12
    xtol: float = 1e-12
    gtol: float = 1e-12
    bound_tol: float = 1e-6

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise DomainError("tol must be > 0 and max_iter >= 1")
        lb1, lb2 = self.lower_bounds
        if lb1 < 0 or lb2 <= 0:
            raise DomainError(f"lower bounds need q1 >= 0 and q2 > 0, got {self.lower_bounds}")


@dataclass(frozen=True)
class ConfidenceEllipse:
    """
    Confidence region {q : (q - center)^T cov^{-1} (q - center) <= quantile}.

    semi_axes are sorted largest first; angle is the direction of the major
    axis in radians, measured from the q1 axis.
    """
    center: np.ndarray
    cov: Mat
    level: float
    quantile: float
    semi_axes: np.ndarray
    angle: float
    axes: Mat = field(repr=False)

    def mahalanobis2(self, q: ArrayLike) -> float:
        d = np.asarray(q, dtype=np.float64).ravel() - self.center
        return float(d @ np.linalg.solve(self.cov, d))

    def contains(self, q: Union[ArrayLike, ParamQ]) -> bool:
        if isinstance(q, ParamQ):
            q = q.as_array()
        return self.mahalanobis2(q) <= self.quantile

    def boundary(self, points: int = 100) -> np.ndarray:
        """Points on the ellipse boundary, shape (points, 2), for plotting."""
        phi = np.linspace(0.0, 2.0 * np.pi, points)
        circle = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return self.center + (circle * self.semi_axes) @ self.axes.T


def confidence_ellipse(center: ArrayLike, cov: ArrayLike, level: float = 0.95) -> ConfidenceEllipse:
    """
    Confidence ellipse of a bivariate normal estimate.

    Args:
        center: Estimate (2-vector)
        cov: 2 x 2 covariance of the estimate
        level: Coverage probability

    Returns:
        ConfidenceEllipse scaled by the chi-square(2) quantile at `level`
    """
    c = np.asarray(center, dtype=np.float64).ravel()
    S = np.asarray(cov, dtype=np.float64)
    if c.size != 2 or S.shape != (2, 2):
        raise DimensionError("confidence ellipse needs a 2-vector and a 2x2 covariance")
    if not 0 < level < 1:
        raise DomainError(f"level must be in (0, 1), got {level}")

    quantile = float(chi2.ppf(level, df=2))
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    semi_axes = np.sqrt(quantile * evals)
    angle = float(np.arctan2(evecs[1, 0], evecs[0, 0]))
    return ConfidenceEllipse(
        center=c,
        cov=S,
        level=level,
        quantile=quantile,
        semi_axes=semi_axes,
        angle=angle,
        axes=evecs,
    )


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit with asymptotic inference."""
    q_hat: ParamQ
    sigma2_hat: float
    gamma_hat: Mat
    cov_qhat: Optional[Mat]
    objective_value: float
    iterations: int
    converged: bool
    gradient_norm: float
    M: int
    starts_tried: int = 1
    message: str = ""
    condition_number: float = float("nan")
    residuals: Optional[np.ndarray] = field(default=None, repr=False)
    warnings: List[str] = field(default_factory=list)

    @property
    def identifiable(self) -> bool:
        return self.cov_qhat is not None

    @property
    def residual_rmse(self) -> float:
        return float(np.sqrt(self.sigma2_hat))

    def ellipse(self, level: float = 0.95) -> Optional[ConfidenceEllipse]:
        if self.cov_qhat is None:
            return None
        return confidence_ellipse(self.q_hat.as_array(), self.cov_qhat, level)
