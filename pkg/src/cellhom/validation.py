"""Argument checks shared by the estimators and the command line."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils import check_array


def check_xi_batch(X, m: int, d: int) -> np.ndarray:
    """Rows of ``m*d`` entries (or an ``(n, m, d)`` stack) as an ``(n, m, d)`` array."""
    A = np.asarray(X, dtype=float)
    if A.ndim == 3:
        A = A.reshape(len(A), -1)
    elif A.ndim <= 1 and m * d == 1:
        A = A.reshape(-1, 1)
    A = check_array(A, dtype=float, ensure_2d=True)
    if A.shape[1] != m * d:
        raise ValueError(f"expected {m * d} entries per matrix, got {A.shape[1]}")
    return A.reshape(-1, m, d)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_schedule(values: Sequence, name: str, kind=float, minimum=None, strict_min: bool = False) -> tuple:
    """Nonempty tuple of ``kind`` values, each at least (or above) ``minimum``."""
    vals = tuple(kind(v) for v in values)
    if not vals:
        raise ValueError(f"{name} must be nonempty")
    if kind is int and any(int(v) != v for v in values):
        raise ValueError(f"{name} entries must be integers")
    if minimum is not None:
        bad = [v for v in vals if (v <= minimum if strict_min else v < minimum)]
        if bad:
            rel = ">" if strict_min else ">="
            raise ValueError(f"{name} entries must be {rel} {minimum}, got {bad[0]!r}")
    return vals


def check_unit_interval(t: float, name: str = "t") -> float:
    t = float(t)
    if not 0 < t <= 1:
        raise ValueError(f"{name} must lie in (0, 1]")
    return t
