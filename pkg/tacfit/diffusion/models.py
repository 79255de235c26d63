"""
Value types for the skin-diffusion forward model.
"""

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike

from ..errors import DimensionError, DomainError
from ..matexp import Mat, as_matrix


def _frozen(m: Mat) -> Mat:
    m = np.array(m, dtype=np.float64, copy=True)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class ParamQ:
    """
    Diffusion parameter q = (q1, q2).

    q1 is the normalized diffusivity scaling D, q2 the input gain scaling F.
    Only q2 > 0 is required for membership in the admissible set.
    """
    q1: float
    q2: float

    def __post_init__(self):
        object.__setattr__(self, "q1", float(self.q1))
        object.__setattr__(self, "q2", float(self.q2))
        if not (np.isfinite(self.q1) and np.isfinite(self.q2)):
            raise DomainError(f"q must be finite, got ({self.q1}, {self.q2})")
        if self.q2 <= 0:
            raise DomainError(f"q2 must be > 0, got {self.q2}")

    @classmethod
    def from_array(cls, values: ArrayLike) -> "ParamQ":
        arr = np.asarray(values, dtype=np.float64).ravel()
        if arr.size != 2:
            raise DimensionError(f"q needs exactly 2 components, got {arr.size}")
        return cls(arr[0], arr[1])

    @classmethod
    def parse(cls, text: str) -> "ParamQ":
        """Parse 'q1,q2'."""
        parts = [p for p in text.replace(" ", "").split(",") if p]
        try:
            values = [float(p) for p in parts]
        except ValueError:
            values = []
        if len(values) != 2:
            raise DomainError(f"expected 'q1,q2', got '{text}'")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2])

    def __iter__(self) -> Iterator[float]:
        yield self.q1
        yield self.q2


@dataclass(frozen=True)
class SystemTemplate:
    """Known matrices (D, E, F, C) of the k-dimensional approximation."""
    k: int
    D: Mat
    E: Mat
    F: Mat
    C: Mat
    label: str = "custom"

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be positive, got {self.k}")
        k = self.k
        D = as_matrix(self.D, "D")
        E = as_matrix(self.E, "E")
        F = as_matrix(self.F, "F")
        C = as_matrix(self.C, "C").reshape(1, -1) if np.ndim(self.C) == 1 else as_matrix(self.C, "C")
        expected = {"D": (k, k), "E": (k, k), "F": (k, 1), "C": (1, k)}
        for name, m in (("D", D), ("E", E), ("F", F), ("C", C)):
            if m.shape != expected[name]:
                raise DimensionError(f"{name} must be {expected[name]}, got {m.shape}")
        object.__setattr__(self, "D", _frozen(D))
        object.__setattr__(self, "E", _frozen(E))
        object.__setattr__(self, "F", _frozen(F))
        object.__setattr__(self, "C", _frozen(C))


@dataclass(frozen=True)
class SystemRealization:
    """A = q1 D + E, B = q2 F and C for one parameter value."""
    A: Mat
    B: Mat
    C: Mat
    q: ParamQ

    @property
    def k(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class BracCurve:
    """
    Piecewise-constant BrAC input mu on [0, T].

    breakpoints[i] is the left end of segment i; segment i runs to
    breakpoints[i+1] (or to horizon_T for the last one) at level levels[i].
    """
    horizon_T: float
    breakpoints: np.ndarray
    levels: np.ndarray
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        T = float(self.horizon_T)
        if not np.isfinite(T) or T <= 0:
            raise DomainError(f"horizon_T must be > 0, got {self.horizon_T}")
        bp = np.asarray(self.breakpoints, dtype=np.float64).ravel()
        lv = np.asarray(self.levels, dtype=np.float64).ravel()
        if bp.size == 0 or bp.size != lv.size:
            raise DimensionError(f"need one level per segment, got {bp.size} breakpoints and {lv.size} levels")
        if bp[0] != 0.0:
            raise DomainError(f"breakpoints must start at 0, got {bp[0]}")
        if np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly ascending")
        if bp[-1] >= T:
            raise DomainError(f"last breakpoint {bp[-1]} must lie before horizon {T}")
        if not np.all(np.isfinite(lv)) or np.any(lv < 0):
            raise DomainError("levels must be finite and >= 0")

        object.__setattr__(self, "horizon_T", T)
        object.__setattr__(self, "breakpoints", _frozen(bp))
        object.__setattr__(self, "levels", _frozen(lv))
        object.__setattr__(self, "edges", _frozen(np.append(bp, T)))

    @classmethod
    def uniform(cls, T: float, levels: Sequence[float]) -> "BracCurve":
        """Curve with len(levels) equal-length segments on [0, T]."""
        lv = np.asarray(levels, dtype=np.float64).ravel()
        return cls(T, T * np.arange(lv.size) / lv.size, lv)

    @classmethod
    def constant(cls, T: float, level: float, segments: int = 1) -> "BracCurve":
        return cls.uniform(T, np.full(segments, float(level)))

    @classmethod
    def zeros(cls, T: float, segments: int = 1) -> "BracCurve":
        return cls.constant(T, 0.0, segments)

    @property
    def n_segments(self) -> int:
        return int(self.levels.size)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.levels == 0))

    def level_at(self, s: ArrayLike) -> np.ndarray:
        """Evaluate mu(s); segments are closed on the left."""
        s = np.asarray(s, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        return self.levels[np.clip(idx, 0, self.n_segments - 1)]

    def scaled(self, c: float) -> "BracCurve":
        return self.with_levels(self.levels * float(c))

    def with_levels(self, levels: ArrayLike) -> "BracCurve":
        return BracCurve(self.horizon_T, self.breakpoints, np.asarray(levels, dtype=np.float64))


@dataclass(frozen=True)
class TacGradient:
    """TAC output and its partials with respect to q1 and q2 at one time."""
    f: float
    df_dq1: float
    df_dq2: float

    @property
    def gradient(self) -> np.ndarray:
        return np.array([self.df_dq1, self.df_dq2])
