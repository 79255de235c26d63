"""
Dense small-matrix kernels: the matrix exponential, directional derivatives of
e^{uA} via block augmentation, and exact convolution steps against a constant input.

All functions are pure and take/return numpy arrays, so they are safe to call
from any number of threads.
"""

from dataclasses import dataclass
from math import factorial
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm as _scipy_expm

from .errors import DimensionError, DomainError

Mat = NDArray[np.float64]

__all__ = [
    "Mat",
    "DirDerivStack",
    "as_matrix",
    "expm",
    "build_block",
    "directional_derivs",
    "conv_step",
]


def as_matrix(x: ArrayLike, name: str = "matrix", square: bool = False) -> Mat:
    """
    Coerce to a finite 2-D float array.

    Args:
        x: Array-like input (scalars become 1x1, vectors become columns)
        name: Name used in error messages
        square: Require a square result

    Returns:
        2-D float64 array

    Raises:
        DimensionError: If the input is not 2-D (or not square when required)
        DomainError: If any entry is not finite
    """
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class DirDerivStack:
    """
    Directional derivatives of e^{uA} in direction V.

    blocks[j] is the j-th derivative of e^{u(A+hV)} with respect to h at h=0;
    blocks[0] is e^{uA} itself.
    """
    order: int
    blocks: Tuple[Mat, ...]

    def __post_init__(self):
        if self.order < 0:
            raise DomainError(f"order must be >= 0, got {self.order}")
        if len(self.blocks) != self.order + 1:
            raise DimensionError(f"expected {self.order + 1} blocks, got {len(self.blocks)}")
        shape = self.blocks[0].shape
        if shape[0] != shape[1] or any(b.shape != shape for b in self.blocks):
            raise DimensionError("all derivative blocks must be square with identical shape")

    def __getitem__(self, j: int) -> Mat:
        return self.blocks[j]

    def __len__(self) -> int:
        return len(self.blocks)


def expm(M: ArrayLike) -> Mat:
    """
    Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    Args:
        M: Square matrix with finite entries

    Returns:
        e^M
    """
    m = as_matrix(M, "M", square=True)
    return np.asarray(_scipy_expm(m), dtype=np.float64)


def build_block(A: ArrayLike, V: ArrayLike, order: int) -> Mat:
    """
    Block upper bidiagonal matrix with A on the diagonal and V on the superdiagonal.

    Args:
        A: k x k matrix
        V: k x k direction matrix
        order: n >= 0; the result has (n+1) x (n+1) blocks

    Returns:
        (n+1)k x (n+1)k matrix
    """
    a = as_matrix(A, "A", square=True)
    v = as_matrix(V, "V", square=True)
    if a.shape != v.shape:
        raise DimensionError(f"A {a.shape} and V {v.shape} must have equal dimension")
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")

    k = a.shape[0]
    size = (order + 1) * k
    out = np.zeros((size, size))
    for i in range(order + 1):
        out[i * k:(i + 1) * k, i * k:(i + 1) * k] = a
        if i < order:
            out[i * k:(i + 1) * k, (i + 1) * k:(i + 2) * k] = v
    return out


def directional_derivs(A: ArrayLike, V: ArrayLike, u: float, order: int) -> DirDerivStack:
    """
    Directional derivatives of e^{uA} in direction V up to the given order.

    The j-th derivative is j! times the j-th block of the first block row of
    e^{u B_n}, where B_n = build_block(A, V, n).

    Args:
        A: k x k matrix
        V: k x k direction matrix
        u: Finite scale
        order: Highest derivative order n >= 0

    Returns:
        DirDerivStack with n+1 blocks
    """
    if not np.isfinite(u):
        raise DomainError(f"u must be finite, got {u}")
    a = as_matrix(A, "A", square=True)
    block = build_block(a, V, order)
    k = a.shape[0]

    blocks = [expm(u * a)]
    if order > 0:
        top_row = expm(u * block)[:k, :]
        for j in range(1, order + 1):
            blocks.append(factorial(j) * top_row[:, j * k:(j + 1) * k])
    return DirDerivStack(order=order, blocks=tuple(blocks))


def conv_step(A: ArrayLike, b: ArrayLike, dt: float) -> Tuple[Mat, Mat]:
    """
    Propagators for one interval of constant unit input.

    Phi = e^{A dt} and Psi = (integral over [0, dt] of e^{As} ds) b, both read off
    exp(dt [[A, b], [0, 0]]). No inverse of A is formed, so singular A is fine.

    Args:
        A: k x k matrix
        b: k x 1 column (1-D input is treated as a column)
        dt: Interval length >= 0

    Returns:
        Tuple of (Phi, Psi) with shapes k x k and k x 1
    """
    a = as_matrix(A, "A", square=True)
    col = as_matrix(b, "b")
    k = a.shape[0]
    if col.shape != (k, 1):
        raise DimensionError(f"b must be a {k}x1 column, got shape {col.shape}")
    if not np.isfinite(dt) or dt < 0:
        raise DomainError(f"dt must be finite and >= 0, got {dt}")

    if dt == 0:
        return np.eye(k), np.zeros((k, 1))

    aug = np.zeros((k + 1, k + 1))
    aug[:k, :k] = a
    aug[:k, k:] = col
    e = np.asarray(_scipy_expm(dt * aug), dtype=np.float64)
    return e[:k, :k], e[:k, k:]
