"""Normalized DFT matrices and the delay-Doppler <-> time-domain maps.

The frame is an M x N grid (M delay bins, N Doppler bins) vectorized
column-wise into a length-MN vector.  Converting between domains applies an
N-point (inverse) DFT across the Doppler axis while leaving the delay axis
untouched, i.e. multiplication by (F_N kron I_M) or its adjoint.  The
Kronecker product is never materialized: vectors are reshaped to the grid and
hit with the small N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class GridShape:
    """Frame geometry: M delay bins (subcarriers) by N Doppler bins (slots)."""

    M: int
    N: int

    def __post_init__(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ValueError(f"grid dimensions must be >= 1, got M={self.M}, N={self.N}")

    @property
    def MN(self) -> int:
        return self.M * self.N


@dataclass(frozen=True)
class DftMatrix:
    """Unitary DFT matrix of a given order."""

    order: int
    entries: np.ndarray


@lru_cache(maxsize=64)
def _dft_entries(n: int) -> np.ndarray:
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    w.flags.writeable = False
    return w


def dft_matrix(n: int) -> DftMatrix:
    """Normalized n-point DFT matrix, entry (k, m) = exp(-2j*pi*k*m/n)/sqrt(n)."""
    if n < 1:
        raise ValueError(f"DFT order must be >= 1, got {n}")
    return DftMatrix(order=n, entries=_dft_entries(n))


def _check_vector(x: np.ndarray, shape: GridShape, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (shape.MN,):
        raise ValueError(f"{name} must have shape ({shape.MN},), got {x.shape}")
    return x


def dd_to_time(x_dd: np.ndarray, shape: GridShape) -> np.ndarray:
    """Map a vectorized delay-Doppler grid to time-domain samples.

    Computes (F_N^H kron I_M) @ x_dd by reshaping to the M x N grid and
    applying the inverse DFT across the Doppler (column) axis.
    """
    x_dd = _check_vector(x_dd, shape, "x_dd")
    fn = _dft_entries(shape.N)
    grid = x_dd.reshape(shape.N, shape.M).T  # column-major vec: grid[m, n]
    out = grid @ fn.conj()                   # F_N is symmetric, so F_N^H = conj(F_N)
    return out.T.reshape(shape.MN)


def time_to_dd(z: np.ndarray, shape: GridShape) -> np.ndarray:
    """Map time-domain samples to the vectorized delay-Doppler grid.

    Computes (F_N kron I_M) @ z; exact inverse of :func:`dd_to_time`.
    """
    z = _check_vector(z, shape, "z")
    fn = _dft_entries(shape.N)
    grid = z.reshape(shape.N, shape.M).T
    out = grid @ fn
    return out.T.reshape(shape.MN)


def conjugate_by_dd(a: np.ndarray, shape: GridShape) -> np.ndarray:
    """Similarity transform (F_N kron I_M) @ A @ (F_N^H kron I_M).

    Applied block-wise on the Doppler index of rows and columns; preserves
    eigenvalues, trace and Frobenius norm.
    """
    a = np.asarray(a)
    mn = shape.MN
    if a.shape != (mn, mn):
        raise ValueError(f"matrix must be {mn}x{mn}, got {a.shape}")
    fn = _dft_entries(shape.N)
    # rows: index i = m1 + M*n1 -> reshape axis to (N, M); contract F over n1
    left = np.einsum("kn,nmj->kmj", fn, a.reshape(shape.N, shape.M, mn))
    left = left.reshape(mn, mn)
    # columns: same contraction with F^H from the right
    right = np.einsum("inm,kn->ikm", left.reshape(mn, shape.N, shape.M), fn.conj())
    return right.reshape(mn, mn)
