"""
Deterministic numeric kernel.

Everything here works on float64 numpy arrays. Vectors are 1-D arrays,
matrices 2-D row-major arrays; all of them must hold finite values.
"""

import logging
from typing import Callable

import numpy as np
import numpy.typing as npt

from avfuse.exceptions import InvalidArgumentError, NumericFailureError

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]


def as_vector(values: npt.ArrayLike, name: str = "vector") -> Vector:
    """Coerce to a non-empty, finite float64 1-D array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidArgumentError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def as_matrix(values: npt.ArrayLike, name: str = "matrix") -> Matrix:
    """Coerce to a finite float64 2-D array (rows x cols)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def _check_rows(values: npt.ArrayLike) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise InvalidArgumentError("softmax input is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("softmax input contains non-finite values")
    return arr


def softmax(v: npt.ArrayLike) -> np.ndarray:
    """
    Probability vector(s) along the last axis.

    Uses max-subtraction, so inputs up to magnitude 1e6 never overflow.
    A 2-D input is treated as a stack of rows.
    """
    arr = _check_rows(v)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(v: npt.ArrayLike) -> np.ndarray:
    """log(softmax(v)) via the log-sum-exp trick."""
    arr = _check_rows(v)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def argmax(v: npt.ArrayLike) -> int:
    """Index of the maximum; the lowest index wins ties."""
    arr = as_vector(v, "argmax input")
    # np.argmax returns the first occurrence
    return int(np.argmax(arr))


def finite_diff_grad(f: Callable[[Vector], float], x: npt.ArrayLike, eps: float = 1e-5) -> Vector:
    """
    Central-difference gradient of a scalar function.

    grad[k] = (f(x + eps*e_k) - f(x - eps*e_k)) / (2*eps)
    """
    if not eps > 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    point = np.array(x, dtype=np.float64).reshape(-1)
    grad = np.zeros_like(point)
    for k in range(point.size):
        original = point[k]
        point[k] = original + eps
        f_plus = float(f(point))
        point[k] = original - eps
        f_minus = float(f(point))
        point[k] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericFailureError(f"f is not finite around coordinate {k}")
        grad[k] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(analytic: npt.ArrayLike, numeric: npt.ArrayLike, floor: float = 1e-8) -> float:
    """max|a - n| / max(max|a|, max|n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise InvalidArgumentError(f"gradient shapes differ: {a.shape} vs {n.shape}")
    if a.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(n))), floor)
    return float(np.max(np.abs(a - n))) / scale
