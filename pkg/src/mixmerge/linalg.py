"""Cholesky factorization and SPD solves, with the failing pivot reported."""

from __future__ import annotations

import numpy as np

from mixmerge.errors import FactorizationError, StructuralError

PIVOT_FLOOR = 1e-12


def cholesky(a: np.ndarray, pivot_floor: float = PIVOT_FLOOR) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a.

    Raises FactorizationError when a pivot falls to ``pivot_floor`` or below
    (relative to the largest diagonal entry); ``pivot_index`` names the column.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(a))))) if n else 1.0
    low = np.zeros_like(a)
    for j in range(n):
        row = low[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > pivot_floor * scale:
            raise FactorizationError(
                f"matrix is not positive definite: pivot {pivot:.3e} at index {j}", pivot_index=j
            )
        d = np.sqrt(pivot)
        low[j, j] = d
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ row) / d
    return low


def solve_lower(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = low.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    for i in range(n):
        x[i] = (x[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def solve_upper_t(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L.T x = b."""
    n = low.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - low[i + 1 :, i] @ x[i + 1 :]) / low[i, i]
    return x


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    low = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != low.shape[0]:
        raise StructuralError(f"rhs length {b.shape[0]} != matrix order {low.shape[0]}")
    return solve_upper_t(low, solve_lower(low, b))
