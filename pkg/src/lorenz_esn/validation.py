"""Input validation helpers shared by the estimators and strategies."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_trajectory(X, *, min_steps: int = 1, n_dims: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a trajectory-like input and return it as a float64 2-D array.

    Accepts ``Trajectory`` objects, nested lists and arrays of shape
    ``(n_steps, n_dims)``. Rejects NaN/inf.
    """
    arr = check_array(X, dtype=np.float64, ensure_min_samples=min_steps, input_name=name)
    if n_dims is not None and arr.shape[1] != n_dims:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {n_dims}")
    return arr


def check_sequences(Xs, *, name: str = "sequences") -> list[np.ndarray]:
    if isinstance(Xs, np.ndarray) or not hasattr(Xs, "__len__") or len(Xs) == 0:
        raise ValueError(f"{name} must be a non-empty list of trajectories")
    arrays = [check_trajectory(X, name=f"{name}[{i}]") for i, X in enumerate(Xs)]
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"{name} mix dimensions {sorted(dims)}")
    return arrays


def check_vector(v, size: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_count(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
