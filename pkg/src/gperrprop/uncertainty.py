"""First-order propagation of test-input noise through the GP mean.

With observed inputs ``x + e``, ``e ~ N(0, S)``, the linearized mean is
``mu(x) + e.g`` where ``g`` is the gradient of the predictive mean, so the
input noise contributes ``g' S g`` to the predictive variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .gp import Predictions, TrainedGP, predict
from .kernel import DimensionError, as_matrix, kernel_grad

_KINDS = ("full", "diagonal", "isotropic")


class NotPSDError(ValueError):
    """Covariance matrix is not symmetric positive semidefinite."""


def psd_cholesky(A, rtol: float = 1e-10) -> np.ndarray:
    """Lower factor L with L L' = A for symmetric PSD (possibly singular) A.

    Pivots within ``rtol * max(diag)`` of zero are treated as exact zeros;
    their column must then vanish as well.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    scale = max(float(np.abs(np.diag(A)).max()), 0.0) if n else 0.0
    tol = rtol * scale
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        col = A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]
        if d > tol:
            L[j, j] = math.sqrt(d)
            L[j + 1 :, j] = col / L[j, j]
        elif d < -tol or np.any(np.abs(col) > math.sqrt(tol * scale) + tol):
            raise NotPSDError(f"covariance is not positive semidefinite (pivot {j} = {d:.3g})")
    return L


@dataclass(frozen=True)
class NoiseModel:
    """Input-noise covariance plus the (reporting-only) output noise variance.

    ``input_cov`` is a D x D matrix for ``kind="full"``, a D-vector of
    variances for ``"diagonal"`` and a scalar variance for ``"isotropic"``.
    """

    input_cov: np.ndarray
    kind: str = "full"
    output_noise_var: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        cov = np.array(self.input_cov, dtype=np.float64)
        if not np.all(np.isfinite(cov)):
            raise ValueError("input covariance contains non-finite values")
        if self.kind == "isotropic":
            if cov.ndim != 0 or cov < 0:
                raise NotPSDError("isotropic input variance must be a nonnegative scalar")
        elif self.kind == "diagonal":
            if cov.ndim != 1 or np.any(cov < 0):
                raise NotPSDError("diagonal input variances must be a nonnegative vector")
        else:
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise DimensionError(f"input covariance must be square, got shape {cov.shape}")
            if np.abs(cov - cov.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(cov).max(initial=0.0)):
                raise NotPSDError("input covariance is not symmetric")
            psd_cholesky(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "input_cov", cov)
        if not self.output_noise_var >= 0:
            raise ValueError("output_noise_var must be >= 0")

    @classmethod
    def isotropic(cls, variance, output_noise_var=0.0):
        return cls(np.float64(variance), "isotropic", output_noise_var)

    @classmethod
    def diagonal(cls, variances, output_noise_var=0.0):
        return cls(variances, "diagonal", output_noise_var)

    @classmethod
    def full(cls, cov, output_noise_var=0.0):
        return cls(cov, "full", output_noise_var)

    @property
    def dim(self) -> int | None:
        """Input dimension, or None for isotropic noise (fits any D)."""
        if self.kind == "isotropic":
            return None
        return self.input_cov.shape[0]

    def _check_dim(self, d):
        if self.dim is not None and self.dim != d:
            raise DimensionError(f"noise model has dimension {self.dim}, expected {d}")

    def covariance(self, dim: int) -> np.ndarray:
        self._check_dim(dim)
        if self.kind == "isotropic":
            return float(self.input_cov) * np.eye(dim)
        if self.kind == "diagonal":
            return np.diag(self.input_cov)
        return np.array(self.input_cov)

    def factor(self, dim: int) -> np.ndarray:
        """Lower factor L of the input covariance (L L' = cov)."""
        self._check_dim(dim)
        if self.kind == "isotropic":
            return math.sqrt(float(self.input_cov)) * np.eye(dim)
        if self.kind == "diagonal":
            return np.diag(np.sqrt(self.input_cov))
        return psd_cholesky(self.input_cov)


def mean_gradient(model: TrainedGP, test) -> np.ndarray:
    """Gradient of the predictive mean at a single test point."""
    test = np.asarray(test, dtype=np.float64)
    if test.ndim != 1 or test.size != model.dim:
        raise DimensionError(f"test point must be a {model.dim}-vector, got shape {test.shape}")
    return kernel_grad(test, model.train_inputs, model.params).T @ model.alpha


def mean_and_gradients(model: TrainedGP, test):
    """Predictive means (M,) and mean gradients (M, D) for a batch of points."""
    T = as_matrix(test, "test")
    if T.shape[1] != model.dim:
        raise DimensionError(f"test points have {T.shape[1]} features, model expects {model.dim}")
    X = np.ascontiguousarray(model.train_inputs)
    alpha = np.ascontiguousarray(model.alpha)
    return _backend.rbf_mean_grad(T, X, alpha, model.params.length_scale)


def propagated_variance(gradient, noise: NoiseModel) -> float:
    """Variance g' S g of the linearized input-noise term."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.ndim != 1:
        raise DimensionError("gradient must be a vector")
    noise._check_dim(g.size)
    if noise.kind == "isotropic":
        return float(noise.input_cov) * float(g @ g)
    if noise.kind == "diagonal":
        return float(noise.input_cov @ (g * g))
    return float(max(g @ noise.input_cov @ g, 0.0))


def propagated_variances(gradients, noise) -> np.ndarray:
    """Row-wise g' S g.

    ``noise`` is a single NoiseModel, or an (M, D, D) stack of per-point
    covariances, or an (M, D) array of per-point diagonal variances.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=np.float64))
    if isinstance(noise, NoiseModel):
        noise._check_dim(G.shape[1])
        if noise.kind == "isotropic":
            return float(noise.input_cov) * np.einsum("ij,ij->i", G, G)
        if noise.kind == "diagonal":
            return (G * G) @ noise.input_cov
        return np.maximum(np.einsum("ij,jk,ik->i", G, noise.input_cov, G), 0.0)
    S = np.asarray(noise, dtype=np.float64)
    if S.shape == G.shape:
        return (G * G * S).sum(axis=1)
    if S.shape != (G.shape[0], G.shape[1], G.shape[1]):
        raise DimensionError(f"per-point covariances of shape {S.shape} do not match gradients {G.shape}")
    return np.maximum(np.einsum("ij,ijk,ik->i", G, S, G), 0.0)


def predict_with_noise(model: TrainedGP, test, noise) -> Predictions:
    """Predictions with mean gradient, propagated and combined variance."""
    base = predict(model, test)
    _, grads = mean_and_gradients(model, test)
    prop = propagated_variances(grads, noise)
    return Predictions(
        mean=base.mean,
        predictive_var=base.predictive_var,
        mean_gradient=grads,
        propagated_var=prop,
        combined_var=base.predictive_var + prop,
    )


def monte_carlo_propagation(model: TrainedGP, test, noise: NoiseModel, n_samples: int, seed: int):
    """Sample mean and unbiased variance of mu(test + e), e ~ N(0, S)."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    test = np.asarray(test, dtype=np.float64)
    if test.ndim != 1 or test.size != model.dim:
        raise DimensionError(f"test point must be a {model.dim}-vector, got shape {test.shape}")
    L = noise.factor(model.dim)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, model.dim))
    samples = np.ascontiguousarray(test + z @ L.T)
    mu = _backend.rbf_mean(
        samples, np.ascontiguousarray(model.train_inputs), np.ascontiguousarray(model.alpha), model.params.length_scale
    )
    # shift by the first draw: exact zero variance when all draws coincide
    d = mu - mu[0]
    s = d.sum()
    var = (d @ d - s * s / n_samples) / (n_samples - 1)
    return float(mu[0] + s / n_samples), float(max(var, 0.0))
