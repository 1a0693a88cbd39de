"""Exact Gaussian process regression with a unit-amplitude RBF kernel.

Fitting factorizes ``K + noise_var * I + jitter * I`` once; predictions,
the log marginal likelihood and its hyperparameter gradient all reuse the
lower Cholesky factor and never form an explicit inverse for prediction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .kernel import DimensionError, KernelParams, as_matrix, kernel_matrix, sq_distances

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
JITTER_START = 1e-10
JITTER_CAP = 1e-4
_PREDICT_CHUNK = 1024
_LOG_2PI = math.log(2.0 * math.pi)


class FactorizationError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even at the jitter cap."""


class OptimizationError(RuntimeError):
    """No optimizer restart produced a finite log marginal likelihood."""


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Training or test inputs (N x D) with their targets (N,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.inputs, "inputs")
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim != 1:
            raise DimensionError(f"targets must be 1-D, got shape {y.shape}")
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain non-finite values")
        object.__setattr__(self, "inputs", _readonly(X))
        object.__setattr__(self, "targets", _readonly(y))

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class TrainedGP:
    train_inputs: np.ndarray
    alpha: np.ndarray
    chol_factor: np.ndarray
    params: KernelParams
    output_noise_var: float
    jitter: float

    def __post_init__(self):
        for name in ("train_inputs", "alpha", "chol_factor"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.train_inputs.shape[0]
        if self.alpha.shape != (n,) or self.chol_factor.shape != (n, n):
            raise DimensionError("alpha / chol_factor shapes do not match the training inputs")

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "length_scale": self.params.length_scale,
            "output_noise_var": self.output_noise_var,
            "jitter": self.jitter,
            "train_inputs": self.train_inputs.tolist(),
            "alpha": self.alpha.tolist(),
            "chol_factor": np.tril(self.chol_factor).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedGP":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
        X = np.asarray(d["train_inputs"], dtype=np.float64)
        return cls(
            train_inputs=X.reshape(len(d["train_inputs"]), -1),
            alpha=np.asarray(d["alpha"], dtype=np.float64),
            chol_factor=np.asarray(d["chol_factor"], dtype=np.float64).reshape(X.shape[0], X.shape[0]),
            params=KernelParams(float(d["length_scale"])),
            output_noise_var=float(d["output_noise_var"]),
            jitter=float(d["jitter"]),
        )


@dataclass(frozen=True)
class PredictionResult:
    """Per-point prediction. Gradient and propagated terms are optional."""

    mean: float
    predictive_var: float
    mean_gradient: np.ndarray | None = None
    propagated_var: float | None = None
    combined_var: float | None = None


@dataclass(frozen=True, eq=False)
class Predictions(Sequence):
    """Column-oriented batch of predictions; indexes as PredictionResult."""

    mean: np.ndarray
    predictive_var: np.ndarray
    mean_gradient: np.ndarray | None = None
    propagated_var: np.ndarray | None = None
    combined_var: np.ndarray | None = field(default=None)

    def __len__(self):
        return self.mean.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return PredictionResult(
            mean=float(self.mean[i]),
            predictive_var=float(self.predictive_var[i]),
            mean_gradient=None if self.mean_gradient is None else self.mean_gradient[i].copy(),
            propagated_var=None if self.propagated_var is None else float(self.propagated_var[i]),
            combined_var=None if self.combined_var is None else float(self.combined_var[i]),
        )

    @classmethod
    def from_results(cls, results: Sequence[PredictionResult]) -> "Predictions":
        if isinstance(results, Predictions):
            return results

        def column(name):
            vals = [getattr(r, name) for r in results]
            return None if any(v is None for v in vals) else np.asarray(vals, dtype=np.float64)

        return cls(
            mean=column("mean"),
            predictive_var=column("predictive_var"),
            mean_gradient=column("mean_gradient"),
            propagated_var=column("propagated_var"),
            combined_var=column("combined_var"),
        )


def factorize(K, noise_var):
    """Cholesky of ``K + (noise_var + jitter) I`` with jitter escalation.

    Jitter starts at 1e-10 * max diagonal and grows by 10x up to 1e-4 *
    max diagonal. Returns ``(L, jitter)``.
    """
    Ky = K.copy()
    Ky[np.diag_indices_from(Ky)] += noise_var
    maxdiag = float(Ky.diagonal().max())
    diag = np.diag_indices_from(Ky)
    start = round(math.log10(JITTER_START))
    stop = round(math.log10(JITTER_CAP))
    for e in range(start, stop + 1):
        jitter = 10.0**e * maxdiag
        A = Ky.copy()
        A[diag] += jitter
        try:
            L = linalg.cholesky(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.diag(L) > 0) and np.all(np.isfinite(L)):
            if e > start:
                log.debug("cholesky needed jitter %.3g", jitter)
            return L, jitter
    raise FactorizationError(
        f"kernel matrix not positive definite at jitter cap {JITTER_CAP:g} x max diagonal "
        "(duplicated inputs with zero output noise?)"
    )


def fit(data: Dataset, params: KernelParams, output_noise_var: float) -> TrainedGP:
    """Factorize the regularized kernel matrix and solve for the dual weights."""
    output_noise_var = float(output_noise_var)
    if not (math.isfinite(output_noise_var) and output_noise_var >= 0):
        raise ValueError(f"output_noise_var must be >= 0, got {output_noise_var!r}")
    X = data.inputs
    K = kernel_matrix(X, X, params)
    L, jitter = factorize(K, output_noise_var)
    alpha = linalg.cho_solve((L, True), data.targets, check_finite=False)
    return TrainedGP(X, alpha, L, params, output_noise_var, jitter)


def _check_test(model, test):
    T = as_matrix(test, "test")
    if T.shape[1] != model.dim:
        raise DimensionError(f"test points have {T.shape[1]} features, model expects {model.dim}")
    return T


def predict(model: TrainedGP, test) -> Predictions:
    """Predictive mean and variance at each test row.

    Variance is ``noise_var + max(1 - v.v, 0)`` with ``v = L^-1 k_*``.
    """
    T = _check_test(model, test)
    m = T.shape[0]
    mean = np.empty(m)
    var = np.empty(m)
    for start in range(0, m, _PREDICT_CHUNK):
        sl = slice(start, min(start + _PREDICT_CHUNK, m))
        Ks = kernel_matrix(T[sl], model.train_inputs, model.params)
        mean[sl] = Ks @ model.alpha
        v = linalg.solve_triangular(model.chol_factor, Ks.T, lower=True, check_finite=False)
        latent = 1.0 - np.einsum("ij,ij->j", v, v)
        var[sl] = model.output_noise_var + np.maximum(latent, 0.0)
    return Predictions(mean=mean, predictive_var=var)


def log_marginal_likelihood(model: TrainedGP, targets) -> float:
    """log p(y | X) under the model's stored factorization."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != (model.n,):
        raise DimensionError(f"expected {model.n} targets, got shape {y.shape}")
    alpha = linalg.cho_solve((model.chol_factor, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.log(np.diag(model.chol_factor)).sum() - 0.5 * model.n * _LOG_2PI)


# --- hyperparameter optimization -------------------------------------------


class _LMLObjective:
    """LML over theta = (log length_scale, log noise_var) for a fixed dataset."""

    def __init__(self, data: Dataset):
        self.d2 = sq_distances(data.inputs, data.inputs)
        self.y = data.targets
        self.n = data.n

    def _factor(self, theta):
        ls, noise = math.exp(theta[0]), math.exp(theta[1])
        K = np.exp(self.d2 * (-0.5 / ls**2))
        L, _ = factorize(K, noise)
        return K, L, ls, noise

    def value(self, theta) -> float:
        try:
            _, L, _, _ = self._factor(theta)
        except FactorizationError:
            return -math.inf
        alpha = linalg.cho_solve((L, True), self.y, check_finite=False)
        return float(-0.5 * self.y @ alpha - np.log(np.diag(L)).sum() - 0.5 * self.n * _LOG_2PI)

    def value_and_grad(self, theta):
        K, L, ls, noise = self._factor(theta)
        alpha = linalg.cho_solve((L, True), self.y, check_finite=False)
        Kinv = linalg.cho_solve((L, True), np.eye(self.n), check_finite=False)
        lml = float(-0.5 * self.y @ alpha - np.log(np.diag(L)).sum() - 0.5 * self.n * _LOG_2PI)
        # dK/dlog(ls) = K * d2 / ls^2 ; dKy/dlog(noise) = noise * I
        dK = K * self.d2 / ls**2
        g_ls = 0.5 * (alpha @ dK @ alpha - np.einsum("ij,ji->", Kinv, dK))
        g_noise = 0.5 * noise * (alpha @ alpha - np.trace(Kinv))
        return lml, np.array([g_ls, g_noise])


def lml_gradient(data: Dataset, params: KernelParams, output_noise_var: float):
    """LML and its gradient with respect to (log length_scale, log noise_var)."""
    theta = np.array([math.log(params.length_scale), math.log(output_noise_var)])
    return _LMLObjective(data).value_and_grad(theta)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 5
    max_iter: int = 200
    tol: float = 1e-6
    grad_tol: float = 1e-5
    max_halvings: int = 30
    seed: int = 0


class HyperOptResult(NamedTuple):
    params: KernelParams
    output_noise_var: float
    log_marginal_likelihood: float


def median_pairwise_distance(X) -> float:
    d2 = sq_distances(X, X)
    iu = np.triu_indices(d2.shape[0], k=1)
    return float(np.sqrt(np.median(d2[iu]))) if iu[0].size else 0.0


def restart_points(data: Dataset, config: OptimizerConfig) -> np.ndarray:
    """Log-uniform initial (log ls, log noise_var) pairs, one row per restart."""
    if data.n < 2:
        raise ValueError("hyperparameter optimization needs at least 2 training points")
    dbar = median_pairwise_distance(data.inputs)
    if dbar <= 0:
        raise ValueError("all training inputs coincide; length-scale range is degenerate")
    vy = float(np.var(data.targets))
    if vy <= 0:
        vy = 1.0
    rng = np.random.default_rng(config.seed)
    log_ls = rng.uniform(math.log(0.1 * dbar), math.log(10.0 * dbar), size=config.restarts)
    log_nv = rng.uniform(math.log(1e-4 * vy), math.log(vy), size=config.restarts)
    return np.column_stack([log_ls, log_nv])


def _ascend(obj: _LMLObjective, theta, config: OptimizerConfig):
    f, g = obj.value_and_grad(theta)
    if not math.isfinite(f):
        return theta, f
    step = 1.0 / max(1.0, float(np.abs(g).max()))
    for _ in range(config.max_iter):
        if np.abs(g).max() < config.grad_tol:
            break
        for _ in range(config.max_halvings):
            trial = theta + step * g
            ft = obj.value(trial)
            if ft > f:
                break
            step *= 0.5
        else:
            break
        delta = ft - f
        theta = trial
        f, g = obj.value_and_grad(theta)
        step *= 2.0
        if delta < config.tol:
            break
    return theta, f


def optimize_hyperparameters(data: Dataset, config: OptimizerConfig | None = None) -> HyperOptResult:
    """Maximize the LML by multi-start gradient ascent in log space."""
    config = config or OptimizerConfig()
    obj = _LMLObjective(data)
    best = None
    for i, theta0 in enumerate(restart_points(data, config)):
        try:
            theta, f = _ascend(obj, theta0, config)
        except FactorizationError:
            continue
        log.debug("restart %d: ls=%.4g noise=%.4g lml=%.6g", i, math.exp(theta[0]), math.exp(theta[1]), f)
        if math.isfinite(f) and (best is None or f > best[1]):
            best = (theta, f)
    if best is None:
        raise OptimizationError("no restart produced a finite log marginal likelihood")
    theta, f = best
    return HyperOptResult(KernelParams(math.exp(theta[0])), math.exp(theta[1]), f)
