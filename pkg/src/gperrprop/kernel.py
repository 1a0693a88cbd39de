"""Unit-amplitude RBF kernel and its derivative with respect to the test input."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._pykernels import sq_distances as _sq_distances


class DimensionError(ValueError):
    """Raised when array shapes disagree on the input dimension."""


@dataclass(frozen=True)
class KernelParams:
    """RBF hyperparameters. Amplitude is fixed at 1."""

    length_scale: float

    def __post_init__(self):
        ls = float(self.length_scale)
        if not (math.isfinite(ls) and ls > 0):
            raise ValueError(f"length_scale must be positive and finite, got {self.length_scale!r}")
        object.__setattr__(self, "length_scale", ls)


def as_matrix(A, name="array"):
    """Coerce to a C-contiguous float64 2-D array of finite values."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D array with at least one column, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


def _as_vector(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size < 1:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def kernel_eval(a, b, params: KernelParams) -> float:
    """exp(-|a - b|^2 / (2 ls^2)) for two vectors."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.size} vs {b.size}")
    diff = a - b
    return math.exp(-0.5 * float(diff @ diff) / params.length_scale**2)


def sq_distances(A, B) -> np.ndarray:
    """Pairwise squared Euclidean distances, clamped at zero."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    d2 = _sq_distances(A, B)
    if A is B:
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    return d2


def kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    """Kernel matrix with entry (i, j) = k(A[i], B[j]).

    Passing the same array object twice yields an exactly symmetric matrix
    with unit diagonal.
    """
    same = A is B
    A = as_matrix(A, "A")
    B = A if same else as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    K = _backend.rbf_matrix(A, B, params.length_scale)
    if same:
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def kernel_grad(test, train, params: KernelParams) -> np.ndarray:
    """Derivatives of k(test, x_i) with respect to each test coordinate.

    Returns an N x D matrix whose (i, j) entry is
    ``-(test_j - x_ij) / ls^2 * k(test, x_i)``.
    """
    test = _as_vector(test, "test")
    train = as_matrix(train, "train")
    if train.shape[1] != test.size:
        raise DimensionError(f"dimension mismatch: test has {test.size}, train has {train.shape[1]}")
    diff = test[None, :] - train
    k = np.exp(-0.5 * np.einsum("ij,ij->i", diff, diff) / params.length_scale**2)
    return -(diff / params.length_scale**2) * k[:, None]
