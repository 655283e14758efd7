"""Input validation helpers shared by the estimators and metrics."""

from __future__ import annotations

import numpy as np


def check_matrix(X, n_features: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce to a finite float64 2-D array, optionally enforcing width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(
            f"{name} has {arr.shape[1]} columns, expected {n_features}"
        )
    return arr


def check_vector(y, n_rows: int | None = None, name: str = "y") -> np.ndarray:
    """Coerce to a finite float64 1-D array, optionally enforcing length."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n_rows}")
    return arr


def check_fit_arrays(X, y, min_rows: int = 2) -> tuple[np.ndarray, np.ndarray]:
    X = check_matrix(X)
    y = check_vector(y, n_rows=X.shape[0])
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} rows to fit, got {X.shape[0]}")
    return X, y
