"""Exact GP regression with analytic mean derivatives and first-order
propagation of input noise into the predictive uncertainty."""
from ._backend import BACKEND
from .gp import (
    Dataset,
    FactorizationError,
    OptimizerConfig,
    PredictionResult,
    Predictions,
    TrainedGP,
    fit,
    log_marginal_likelihood,
    optimize_hyperparameters,
    predict,
)
from .kernel import KernelParams, kernel_eval, kernel_grad, kernel_matrix
from .uncertainty import (
    NoiseModel,
    mean_gradient,
    monte_carlo_propagation,
    predict_with_noise,
    propagated_variance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Dataset",
    "FactorizationError",
    "KernelParams",
    "NoiseModel",
    "OptimizerConfig",
    "PredictionResult",
    "Predictions",
    "TrainedGP",
    "fit",
    "kernel_eval",
    "kernel_grad",
    "kernel_matrix",
    "log_marginal_likelihood",
    "mean_gradient",
    "monte_carlo_propagation",
    "optimize_hyperparameters",
    "predict",
    "predict_with_noise",
    "propagated_variance",
]
