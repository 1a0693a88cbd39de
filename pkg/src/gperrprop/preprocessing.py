"""Standardization and SVD-based PCA, including projection of input-noise
covariances into the reduced space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import DimensionError, as_matrix


class DegenerateDataError(ValueError):
    pass


def _ro(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PCAModel:
    center: np.ndarray
    basis: np.ndarray
    explained_ratio: np.ndarray

    def __post_init__(self):
        for name in ("center", "basis", "explained_ratio"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        if self.basis.ndim != 2 or self.basis.shape[0] != self.center.shape[0]:
            raise DimensionError("basis rows must match the centering vector")

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "basis": self.basis.tolist(),
            "explained_ratio": self.explained_ratio.tolist(),
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PCAModel":
        basis = np.asarray(d["basis"], dtype=np.float64).reshape(len(d["center"]), int(d["k"]))
        return cls(np.asarray(d["center"]), basis, np.asarray(d["explained_ratio"]))


def pca_fit(X, variance_target: float = 0.99) -> PCAModel:
    """Smallest set of principal directions whose cumulative explained
    variance reaches ``variance_target``.

    Columns are oriented so their largest-magnitude entry is positive.
    """
    if not 0.0 < variance_target <= 1.0:
        raise ValueError(f"variance_target must be in (0, 1], got {variance_target}")
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise DegenerateDataError("PCA needs at least 2 rows")
    center = X.mean(axis=0)
    Xc = X - center
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    power = s * s
    total = power.sum()
    if not total > 0:
        raise DegenerateDataError("all columns are constant; total variance is zero")
    ratio = power / total
    cum = np.cumsum(ratio)
    # absorb round-off so that a target of 1.0 stops at the numerical rank
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, len(s))
    basis = Vt[:k].T.copy()
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(k)])
    basis *= signs
    return PCAModel(center, basis, ratio[:k])


def pca_transform(model: PCAModel, X) -> np.ndarray:
    X = as_matrix(X, "X")
    if X.shape[1] != model.dim:
        raise DimensionError(f"expected {model.dim} features, got {X.shape[1]}")
    return (X - model.center) @ model.basis


def pca_inverse(model: PCAModel, Z) -> np.ndarray:
    return np.asarray(Z) @ model.basis.T + model.center


def pca_project_noise(model: PCAModel, input_cov) -> np.ndarray:
    """Covariance of PCA-projected Gaussian noise: basis' S basis."""
    S = np.asarray(input_cov, dtype=np.float64)
    if S.shape != (model.dim, model.dim):
        raise DimensionError(f"covariance must be {model.dim}x{model.dim}, got {S.shape}")
    P = model.basis.T @ S @ model.basis
    return 0.5 * (P + P.T)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Affine map v -> (v - mean) / scale; scalar or per-column."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _ro(self.mean))
        object.__setattr__(self, "scale", _ro(self.scale))
        if np.any(~(self.scale > 0)):
            raise ValueError("scale entries must be positive")

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"]), np.asarray(d["scale"]))


def standardize_fit(values) -> Standardizer:
    """Fit on a vector (scalar stats) or a matrix (per-column stats).

    Uses the sample standard deviation (ddof=1).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        raise DegenerateDataError("standardization needs at least 2 samples")
    mean = v.mean(axis=0)
    scale = v.std(axis=0, ddof=1)
    if np.any(scale <= 0):
        raise DegenerateDataError("cannot standardize a zero-variance quantity")
    return Standardizer(mean, scale)


def standardize_apply(st: Standardizer, values) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - st.mean) / st.scale


def standardize_invert(st: Standardizer, values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * st.scale + st.mean


def invert_variance(st: Standardizer, var) -> np.ndarray:
    """Map a variance from standardized to original units (scalar standardizer)."""
    return np.asarray(var, dtype=np.float64) * st.scale**2
