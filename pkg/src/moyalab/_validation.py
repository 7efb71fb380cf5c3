"""Input validation helpers shared by the estimators and free functions."""
from __future__ import annotations

import numbers

import numpy as np


def check_complex_array(x, *, ndim=None, name: str = "array") -> np.ndarray:
    """Return ``x`` as a finite complex128 array, optionally checking ``ndim``."""
    arr = np.asarray(x)
    if arr.dtype == object:
        raise ValueError(f"{name}: expected numeric data")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None:
        allowed = (ndim,) if isinstance(ndim, int) else tuple(ndim)
        if arr.ndim not in allowed:
            raise ValueError(f"{name}: expected ndim in {allowed}, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains NaN or infinity")
    return arr


def check_operator_stack(X, *, name: str = "X") -> np.ndarray:
    """Validate a stack of square matrices of shape ``(N, d, d)``."""
    X = check_complex_array(X, ndim=3, name=name)
    if X.shape[1] != X.shape[2]:
        raise ValueError(f"{name}: matrices must be square, got {X.shape[1:]}")
    if X.shape[0] == 0:
        raise ValueError(f"{name}: empty operator family")
    return X


def check_weights(weights, n: int, *, name: str = "weights") -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"{name}: expected shape ({n},), got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError(f"{name}: all weights must be strictly positive")
    return w


def check_tolerance(tol, *, name: str = "tol") -> float:
    if not isinstance(tol, numbers.Real) or not tol > 0:
        raise ValueError(f"{name} must be a positive real number, got {tol!r}")
    return float(tol)


def check_ladder(ladder) -> tuple[int, ...]:
    levels = tuple(int(d) for d in ladder)
    if not levels:
        raise ValueError("ladder must contain at least one truncation level")
    if any(d < 1 for d in levels):
        raise ValueError("ladder levels must be >= 1")
    return tuple(sorted(set(levels)))


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have different shapes: {a.shape} vs {b.shape}")
