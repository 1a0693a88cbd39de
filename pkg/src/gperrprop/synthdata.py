"""Seeded synthetic regression problems with controlled input noise.

Training targets carry Gaussian output noise; test *inputs* are corrupted
by region-dependent Gaussian input noise while the clean targets are kept
at the uncorrupted inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gp import Dataset
from .uncertainty import NoiseModel, psd_cholesky


def _sinmix(X):
    return np.sin(3.0 * X).sum(axis=1) + 0.5 * X[:, 0] ** 2


def _linear(X):
    return X.sum(axis=1)


def _constant(X):
    return np.zeros(X.shape[0])


LATENTS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sinmix": _sinmix,
    "linear": _linear,
    "constant": _constant,
}


@dataclass(frozen=True)
class Box:
    """Axis-aligned region; ``None`` bounds leave an axis unrestricted."""

    low: Sequence[float | None]
    high: Sequence[float | None]

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        inside = np.ones(X.shape[0], dtype=bool)
        for j, (lo, hi) in enumerate(zip(self.low, self.high)):
            if lo is not None:
                inside &= X[:, j] >= lo
            if hi is not None:
                inside &= X[:, j] < hi
        return inside

    @classmethod
    def slab(cls, dim: int, axis: int, low: float, high: float) -> "Box":
        lo = [None] * dim
        hi = [None] * dim
        lo[axis], hi[axis] = low, high
        return cls(lo, hi)


@dataclass(frozen=True)
class RegionNoise:
    """Piecewise input noise: first matching region wins, else ``default``."""

    regions: Sequence[tuple[Box, NoiseModel]]
    default: NoiseModel | None = None

    def covariances(self, X) -> np.ndarray:
        m, d = X.shape
        out = np.zeros((m, d, d))
        assigned = np.zeros(m, dtype=bool)
        for box, noise in self.regions:
            sel = box.contains(X) & ~assigned
            out[sel] = noise.covariance(d)
            assigned |= sel
        if self.default is not None:
            out[~assigned] = self.default.covariance(d)
        return out


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 5000
    n_test: int = 1000
    dim: int = 2
    latent: str = "sinmix"
    output_noise_var: float = 0.0
    input_noise: NoiseModel | RegionNoise | None = None
    seed: int = 0
    domain_box: Sequence[tuple[float, float]] | None = None
    train_gap: Box | None = None
    test_margin: float = 0.0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1 or self.dim < 1:
            raise ValueError("n_train, n_test and dim must be >= 1")
        if self.latent not in LATENTS:
            raise ValueError(f"unknown latent {self.latent!r}; choose from {sorted(LATENTS)}")
        if self.output_noise_var < 0:
            raise ValueError("output_noise_var must be >= 0")
        box = self.bounds()
        if box.shape != (self.dim, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("domain_box needs one (low, high) pair per dimension with low < high")
        if self.test_margin < 0 or np.any(2 * self.test_margin >= box[:, 1] - box[:, 0]):
            raise ValueError("test_margin must be >= 0 and leave a non-empty test box")

    def bounds(self) -> np.ndarray:
        if self.domain_box is None:
            return np.tile([-1.0, 1.0], (self.dim, 1))
        return np.asarray(self.domain_box, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    train: Dataset
    test: Dataset
    clean_test_targets: np.ndarray
    true_input_noise: np.ndarray
    clean_test_inputs: np.ndarray = field(repr=False)


def _uniform(rng, n, bounds, reject=None):
    lo, hi = bounds[:, 0], bounds[:, 1]
    if reject is None:
        return lo + (hi - lo) * rng.random((n, len(lo)))
    out = np.empty((0, len(lo)))
    while out.shape[0] < n:
        batch = lo + (hi - lo) * rng.random((2 * (n - out.shape[0]) + 16, len(lo)))
        out = np.vstack([out, batch[~reject.contains(batch)]])
    return out[:n]


def generate(spec: SyntheticSpec) -> SyntheticData:
    """Draw train/test sets; train and test use independent sub-streams."""
    f = LATENTS[spec.latent]
    bounds = spec.bounds()
    train_ss, test_ss = np.random.SeedSequence(spec.seed).spawn(2)
    train_rng = np.random.default_rng(train_ss)
    test_rng = np.random.default_rng(test_ss)

    Xtr = _uniform(train_rng, spec.n_train, bounds, spec.train_gap)
    ytr = f(Xtr)
    if spec.output_noise_var > 0:
        ytr = ytr + np.sqrt(spec.output_noise_var) * train_rng.standard_normal(spec.n_train)

    # test points may be kept away from the edges so that input noise
    # rarely pushes them outside the region covered by training data
    test_bounds = bounds + np.array([spec.test_margin, -spec.test_margin])
    Xte = _uniform(test_rng, spec.n_test, test_bounds)
    clean = f(Xte)
    yte = clean.copy()
    if spec.output_noise_var > 0:
        yte = yte + np.sqrt(spec.output_noise_var) * test_rng.standard_normal(spec.n_test)

    d = spec.dim
    if spec.input_noise is None:
        covs = np.zeros((spec.n_test, d, d))
    elif isinstance(spec.input_noise, RegionNoise):
        covs = spec.input_noise.covariances(Xte)
    else:
        covs = np.broadcast_to(spec.input_noise.covariance(d), (spec.n_test, d, d)).copy()
    z = test_rng.standard_normal((spec.n_test, d))
    factors = np.stack([_psd_factor(c) for c in covs]) if np.any(covs) else np.zeros_like(covs)
    Xobs = Xte + np.einsum("ijk,ik->ij", factors, z)

    return SyntheticData(
        train=Dataset(Xtr, ytr),
        test=Dataset(Xobs, yte),
        clean_test_targets=clean,
        true_input_noise=covs,
        clean_test_inputs=Xte,
    )


def _psd_factor(cov):
    if not np.any(cov):
        return np.zeros_like(cov)
    if np.count_nonzero(cov - np.diag(np.diag(cov))) == 0:
        return np.diag(np.sqrt(np.diag(cov)))
    return psd_cholesky(cov)
