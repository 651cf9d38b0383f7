"""Quadratic Wasserstein distances between empirical measures."""

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from mfgc.errors import DomainError

MAX_ASSIGNMENT_SIZE = 64


def _samples_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def w2_1d(a, b) -> float:
    """
    W2 between uniform empirical measures on R.

    Equal sizes pair the order statistics. Unequal sizes integrate the squared
    difference of the two quantile functions over the common refinement of
    their jump points, which is the exact monotone coupling.
    """
    x = np.sort(_samples_1d(a, "a"))
    y = np.sort(_samples_1d(b, "b"))
    if x.size == y.size:
        return float(np.sqrt(np.mean((x - y) ** 2)))

    cuts = np.union1d(np.arange(1, x.size + 1) / x.size, np.arange(1, y.size + 1) / y.size)
    widths = np.diff(cuts, prepend=0.0)
    mid = cuts - 0.5 * widths
    ix = np.minimum((mid * x.size).astype(int), x.size - 1)
    iy = np.minimum((mid * y.size).astype(int), y.size - 1)
    return float(np.sqrt(np.sum(widths * (x[ix] - y[iy]) ** 2)))


def _points(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DomainError(f"{name} must be a non-empty (n, d) point set")
    return arr


def w2_exact_small(a, b) -> float:
    """Exact W2 between equal-size point clouds in R^d by optimal assignment on squared distances."""
    x = _points(a, "a")
    y = _points(b, "b")
    if x.shape != y.shape:
        raise DomainError(f"point sets differ in shape: {x.shape} vs {y.shape}")
    if x.shape[0] > MAX_ASSIGNMENT_SIZE:
        raise DomainError(
            f"exact assignment is limited to n <= {MAX_ASSIGNMENT_SIZE}, got {x.shape[0]}", x.shape[0]
        )
    cost = cdist(x, y, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def w2(a, b) -> float:
    """w2_1d for one-dimensional samples, exact assignment otherwise."""
    x = np.asarray(a, dtype=float)
    if x.ndim == 1 or (x.ndim == 2 and x.shape[1] == 1):
        return w2_1d(a, b)
    return w2_exact_small(a, b)
