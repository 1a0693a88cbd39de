"""End-to-end fitted model: column selection, optional input scaling and
PCA, target standardization and the GP itself, serialized as one JSON
document."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .gp import (
    Dataset,
    OptimizerConfig,
    Predictions,
    TrainedGP,
    fit,
    optimize_hyperparameters,
    predict,
)
from .kernel import DimensionError, KernelParams
from .preprocessing import (
    PCAModel,
    Standardizer,
    pca_fit,
    pca_project_noise,
    pca_transform,
    standardize_apply,
    standardize_fit,
)
from .uncertainty import NoiseModel, mean_and_gradients, propagated_variances

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    gp: TrainedGP
    n_features: int
    keep_columns: list[int] | None = None
    input_scaler: Standardizer | None = None
    pca: PCAModel | None = None
    target_scaler: Standardizer | None = None
    info: dict = field(default_factory=dict)

    @property
    def identity_inputs(self) -> bool:
        return self.keep_columns is None and self.input_scaler is None and self.pca is None

    def _select(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got shape {X.shape}")
        return X if self.keep_columns is None else X[:, self.keep_columns]

    def transform_inputs(self, X) -> np.ndarray:
        Z = self._select(X)
        if self.input_scaler is not None:
            Z = standardize_apply(self.input_scaler, Z)
        if self.pca is not None:
            Z = pca_transform(self.pca, Z)
        return np.ascontiguousarray(Z)

    def input_jacobian(self) -> np.ndarray:
        """W with dz/dx_selected = W' (selected-features x model-inputs)."""
        d = self.n_features if self.keep_columns is None else len(self.keep_columns)
        W = np.eye(d)
        if self.input_scaler is not None:
            W = W / self.input_scaler.scale[:, None]
        if self.pca is not None:
            W = W @ self.pca.basis
        return W

    def _select_cov(self, S):
        if self.keep_columns is None:
            return S
        idx = np.asarray(self.keep_columns)
        return S[..., idx[:, None], idx[None, :]]

    def project_noise(self, noise, n_points: int):
        """Express original-feature input noise in model-input space.

        ``noise`` is None, a NoiseModel, or an (M, D) array of per-point
        diagonal variances in original feature units.
        """
        if noise is None:
            return NoiseModel.isotropic(0.0)
        if isinstance(noise, NoiseModel):
            if noise.dim is not None and noise.dim != self.n_features:
                raise DimensionError(f"noise has dimension {noise.dim}, data has {self.n_features} features")
            if self.identity_inputs:
                return noise
            S = self._select_cov(noise.covariance(self.n_features))
            if self.input_scaler is not None:
                s = self.input_scaler.scale
                S = S / np.outer(s, s)
            if self.pca is not None:
                S = pca_project_noise(self.pca, S)
            return NoiseModel.full(0.5 * (S + S.T))
        V = np.asarray(noise, dtype=np.float64)
        if V.shape != (n_points, self.n_features):
            raise DimensionError(
                f"per-point noise must have shape ({n_points}, {self.n_features}), got {V.shape}"
            )
        if np.any(V < 0):
            raise ValueError("per-point noise variances must be nonnegative")
        if self.identity_inputs:
            return V
        if self.keep_columns is not None:
            V = V[:, self.keep_columns]
        W = self.input_jacobian()
        return np.einsum("jk,ij,jl->ikl", W, V, W)

    def predict(self, X, noise=None) -> Predictions:
        """Predictions in original target units; gradients per original feature."""
        Z = self.transform_inputs(X)
        zn = self.project_noise(noise, Z.shape[0])
        base = predict(self.gp, Z)
        _, gz = mean_and_gradients(self.gp, Z)
        prop = propagated_variances(gz, zn)
        mean, pvar = base.mean, base.predictive_var
        ts = 1.0
        if self.target_scaler is not None:
            ts = float(self.target_scaler.scale)
            mean = mean * ts + float(self.target_scaler.mean)
            pvar = pvar * ts**2
            prop = prop * ts**2
        gsel = gz @ self.input_jacobian().T * ts
        if self.keep_columns is None:
            grad = gsel
        else:
            grad = np.zeros((gsel.shape[0], self.n_features))
            grad[:, self.keep_columns] = gsel
        return Predictions(mean, pvar, grad, prop, pvar + prop)

    def to_dict(self) -> dict:
        d = self.gp.to_dict()
        d.update(
            n_features=self.n_features,
            keep_columns=self.keep_columns,
            input_scaler=None if self.input_scaler is None else self.input_scaler.to_dict(),
            pca=None if self.pca is None else self.pca.to_dict(),
            target_scaler=None if self.target_scaler is None else self.target_scaler.to_dict(),
            info=self.info,
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPipeline":
        def opt(key, loader):
            return None if d.get(key) is None else loader(d[key])

        return cls(
            gp=TrainedGP.from_dict(d),
            n_features=int(d["n_features"]),
            keep_columns=d.get("keep_columns"),
            input_scaler=opt("input_scaler", Standardizer.from_dict),
            pca=opt("pca", PCAModel.from_dict),
            target_scaler=opt("target_scaler", Standardizer.from_dict),
            info=d.get("info", {}),
        )


def fit_pipeline(
    X,
    y,
    *,
    keep_columns=None,
    standardize_inputs=False,
    pca_var=None,
    standardize_targets=True,
    length_scale=None,
    noise_var=None,
    optimizer=None,
    opt_subsample=1000,
) -> FittedPipeline:
    """Fit every stage in order. Hyperparameters are optimized on a seeded
    subsample of at most ``opt_subsample`` rows unless both are given."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_features = X.shape[1]
    if keep_columns is not None:
        keep_columns = [int(c) for c in keep_columns]
        if not keep_columns or min(keep_columns) < 0 or max(keep_columns) >= n_features:
            raise DimensionError(f"keep_columns must index 0..{n_features - 1}")
    Z = X if keep_columns is None else X[:, keep_columns]
    input_scaler = standardize_fit(Z) if standardize_inputs else None
    if input_scaler is not None:
        Z = standardize_apply(input_scaler, Z)
    pca = pca_fit(Z, pca_var) if pca_var is not None else None
    if pca is not None:
        Z = pca_transform(pca, Z)
        log.info("PCA kept %d of %d components", pca.k, pca.dim)
    target_scaler = standardize_fit(y) if standardize_targets else None
    t = standardize_apply(target_scaler, y) if target_scaler is not None else y
    data = Dataset(Z, t)

    info = {}
    if length_scale is None or noise_var is None:
        config = optimizer or OptimizerConfig()
        sub = data
        if opt_subsample and data.n > opt_subsample:
            rng = np.random.default_rng(config.seed)
            idx = np.sort(rng.choice(data.n, size=opt_subsample, replace=False))
            sub = Dataset(data.inputs[idx], data.targets[idx])
        res = optimize_hyperparameters(sub, config)
        length_scale, noise_var = res.params.length_scale, res.output_noise_var
        info = {"optimized": True, "opt_points": sub.n, "opt_log_marginal_likelihood": res.log_marginal_likelihood}
        log.info("optimized length_scale=%.5g noise_var=%.5g", length_scale, noise_var)
    else:
        info = {"optimized": False}
    if not math.isfinite(length_scale):
        raise ValueError("length_scale must be finite")
    model = fit(data, KernelParams(length_scale), noise_var)
    return FittedPipeline(
        gp=model,
        n_features=n_features,
        keep_columns=keep_columns,
        input_scaler=input_scaler,
        pca=pca,
        target_scaler=target_scaler,
        info=info,
    )
