"""Small input-validation helpers used by the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError


def as_float_matrix(X, *, n_features: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a 2-D float64 array and reject non-finite entries."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(
            f"{name} has {arr.shape[1]} columns, expected {n_features}"
        )
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def as_float_vector(x, *, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def require_fitted(estimator, attribute: str) -> None:
    """Raise ``NotFittedError`` unless ``estimator`` carries ``attribute``."""
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
